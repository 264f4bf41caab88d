//! Marker motion under dilate, shear and twist loads.

pub mod field;
pub mod fit;
pub mod motion;
pub mod render;

pub use field::{MarkerField, MarkerLayout, MarkerStyle};
pub use fit::{fit_lambdas, FitReport, LambdaFit, LoadKind, MotionObservation};
pub use motion::{
    capped_shear, compose_motion, dilate_at, dilate_displacement, shear_at, shear_displacement, twist_at,
    twist_displacement, twist_matrix, ComposedMotion, DisplacementField, MotionCoefficients, Vec2,
};
pub use render::{disc_coverage, flow_arrows, flow_image, marker_coverage, render_markers, Arrow};
