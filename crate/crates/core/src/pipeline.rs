//! The full simulator: smoothing, shading, shadows and markers.

use std::path::Path;

use crate::config::{model_io, raster_io, GelKind, SensorConfig};
use crate::error::{Error, Result};
use crate::marker::{compose_motion, render_markers, ComposedMotion, MarkerField, MotionCoefficients};
use crate::optics::{render_optical, ReflectanceModel, ShadeParams};
use crate::raster::{HeightMap, TactileImage, WeightMap};
use crate::scene::{contact_state, contact_state_from_footprint, extract_foreground, ContactPose, SensorGeometry};
use crate::shadow::{cast_rig_masks, composite_shadows, LightRig, MaskParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub shadows: bool,
    pub markers: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { shadows: true, markers: true }
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    /// Final image.
    pub image: TactileImage,
    /// Shaded image with shadows, before markers.
    pub optical: TactileImage,
    /// One mask per light (empty when shadows are off).
    pub shadow_masks: Vec<WeightMap>,
    /// Marker motion, when markers are on.
    pub motion: Option<ComposedMotion>,
}

#[derive(Debug, Clone)]
pub struct Renderer {
    pub sensor: SensorGeometry,
    pub model: ReflectanceModel,
    pub background: TactileImage,
    /// For curved gels: the no-contact depth subtracted from inputs.
    pub background_depth: Option<HeightMap>,
    pub shade: ShadeParams,
    pub rig: LightRig,
    pub mask: MaskParams,
    pub markers: MarkerField,
    pub motion: MotionCoefficients,
    /// Contact subsampling stride for the dilate sum, pixels.
    pub stride: usize,
    /// Contact threshold for marker motion, mm.
    pub threshold: f64,
}

impl Renderer {
    /// Builds a renderer from a config and its already loaded artifacts.
    pub fn from_parts(cfg: &SensorConfig, model: ReflectanceModel, background: TactileImage) -> Result<Self> {
        cfg.validate()?;
        let sensor = cfg.sensor_geometry();
        background.ensure_dims((sensor.width, sensor.height))?;
        Ok(Self {
            sensor,
            model,
            background,
            background_depth: None,
            shade: cfg.shade_params(),
            rig: cfg.light_rig()?,
            mask: cfg.mask_params(),
            markers: cfg.marker_field()?,
            motion: cfg.motion(),
            stride: cfg.markers.stride,
            threshold: cfg.sensor.contact_threshold,
        })
    }

    /// Loads the model, background (and background depth for curved gels)
    /// referenced by `cfg`, resolving paths against `base`.
    pub fn from_config(cfg: &SensorConfig, base: &Path) -> Result<Self> {
        let model_path = cfg.optics.model.as_ref().ok_or_else(|| {
            Error::validation("optics.model", "no reflectance model configured; run `tacsim calibrate optics` first")
        })?;
        let bg_path = cfg
            .optics
            .background
            .as_ref()
            .ok_or_else(|| Error::validation("optics.background", "no background image configured"))?;
        let model = model_io::read_model(&base.join(model_path))?;
        let background = raster_io::read_image_png(&base.join(bg_path))?;
        let mut r = Self::from_parts(cfg, model, background)?;
        if cfg.sensor.gel == GelKind::Curved {
            let p = cfg.optics.background_depth.as_ref().ok_or_else(|| {
                Error::validation("optics.background_depth", "curved gels need a background depth raster")
            })?;
            r.background_depth = Some(raster_io::read_raster(&base.join(p))?);
        }
        Ok(r)
    }

    /// Heights relative to the undeformed gel.
    pub fn foreground(&self, hm: &HeightMap) -> Result<HeightMap> {
        if hm.dims() != (self.sensor.width, self.sensor.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.sensor.width, self.sensor.height),
                actual: hm.dims(),
            });
        }
        match &self.background_depth {
            Some(bg) => extract_foreground(hm, bg),
            None => Ok(hm.clone()),
        }
    }

    /// Shading plus optional shadows.
    pub fn render_optical(&self, hm: &HeightMap, shadows: bool) -> Result<(TactileImage, Vec<WeightMap>)> {
        let (img, _) = render_optical(hm, &self.model, &self.background, &self.shade)?;
        if !shadows || self.rig.lights.is_empty() || hm.is_zero() {
            return Ok((img, Vec::new()));
        }
        let masks = cast_rig_masks(hm, &self.rig, &self.mask)?;
        let pairs: Vec<_> = masks.iter().zip(&self.rig.lights).collect();
        Ok((composite_shadows(&img, &pairs)?, masks))
    }

    /// Marker motion for the contact in `hm`; `pose` supplies the loads and
    /// the object origin (the footprint centroid is used without one).
    pub fn marker_motion(&self, hm: &HeightMap, pose: Option<&ContactPose>) -> Result<ComposedMotion> {
        let state = match pose {
            Some(p) => contact_state(hm, p, self.threshold)?,
            None => contact_state_from_footprint(hm, (0.0, 0.0), 0.0, self.threshold)?,
        };
        let state = state.subsampled(self.stride, hm.pitch());
        Ok(compose_motion(&self.markers, &state, &self.motion))
    }

    /// Marker stage: motion plus stamping onto `img`.
    pub fn render_marker_stage(
        &self,
        img: &TactileImage,
        hm: &HeightMap,
        pose: Option<&ContactPose>,
    ) -> Result<(TactileImage, ComposedMotion)> {
        let motion = self.marker_motion(hm, pose)?;
        let out = render_markers(img, &motion.positions, &self.markers.style, self.sensor.pitch)?;
        Ok((out, motion))
    }

    pub fn render(&self, hm: &HeightMap, pose: Option<&ContactPose>, opts: RenderOptions) -> Result<RenderOutput> {
        let hm = self.foreground(hm)?;
        let (optical, shadow_masks) = self.render_optical(&hm, opts.shadows)?;
        let (image, motion) = if opts.markers {
            let (img, m) = self.render_marker_stage(&optical, &hm, pose)?;
            (img, Some(m))
        } else {
            (optical.clone(), None)
        };
        Ok(RenderOutput { image, optical, shadow_masks, motion })
    }
}
