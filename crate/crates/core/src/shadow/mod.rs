//! Planar shadows: projection, masks, compositing and light calibration.

pub mod calibrate;
pub mod composite;
pub mod light;
pub mod mask;
pub mod projection;

pub use calibrate::{
    calibrate_attenuation, calibrate_lights, detect_ball_shadows, detect_shadow_vertex, estimate_attenuation,
    nearest_point_of_lines, refine_shadow_vertex, segment_shadow, shadow_azimuth, tangent_ray, tangent_ray_elevated,
    BallCapture, LightCalibrationReport, LightResidual, Line3, ShadowSegmentation,
};
pub use composite::composite_shadows;
pub use light::{LightKind, LightRig, LightSource};
pub use mask::{cast_rig_masks, cast_shadow_mask, MaskParams};
pub use projection::{
    directional_light_matrix, point_light_matrix, project_directional_shadow, project_point_shadow, ShadowPlane, Vec3,
};
