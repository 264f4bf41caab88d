//! Sensor configuration files and persistence of rasters, models and
//! displacement tables.
//!
//! Configs are TOML. All lengths are mm and all angles degrees. Relative
//! paths inside a config resolve against the config file's directory.

pub mod model_io;
pub mod raster_io;
pub mod table;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marker::{MarkerField, MarkerLayout, MarkerStyle, MotionCoefficients};
use crate::optics::{GaussianKernel, ShadeParams};
use crate::scene::SensorGeometry;
use crate::shadow::{LightRig, LightSource, MaskParams, ShadowPlane, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

const DIGIT_TOML: &str = include_str!("../../configs/digit.toml");
const GELSIGHT_TOML: &str = include_str!("../../configs/gelsight.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GelKind {
    /// Heights are already relative to a flat gel.
    Flat,
    /// Heights come from a curved gel and need background subtraction.
    Curved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// mm per pixel.
    pub pitch: f64,
    pub gel: GelKind,
    /// mm.
    #[serde(default = "default_threshold")]
    pub contact_threshold: f64,
}

fn default_threshold() -> f64 {
    crate::scene::DEFAULT_CONTACT_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub size: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelSpec>,
    #[serde(default = "default_blend")]
    pub blend_width: usize,
    /// Reflectance model file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// No-contact background image (PNG).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
    /// No-contact depth raster for curved gels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_depth: Option<PathBuf>,
}

fn default_kernels() -> Vec<KernelSpec> {
    crate::optics::default_pyramid().iter().map(|k| KernelSpec { size: k.size, sigma: k.sigma }).collect()
}

fn default_blend() -> usize {
    3
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            kernels: default_kernels(),
            blend_width: default_blend(),
            model: None,
            background: None,
            background_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSection {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Default for PlaneSection {
    fn default() -> Self {
        Self { normal: [0.0, 0.0, 1.0], offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowSection {
    #[serde(default)]
    pub plane: PlaneSection,
    /// Feathering σ in pixels.
    #[serde(default = "default_feather")]
    pub feather_sigma: f64,
}

fn default_feather() -> f64 {
    2.0
}

impl Default for ShadowSection {
    fn default() -> Self {
        Self { plane: PlaneSection::default(), feather_sigma: default_feather() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightKindName {
    Point,
    Directional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightEntry {
    pub kind: LightKindName,
    /// Point lights: position, mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    /// Directional lights: unit direction of travel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    pub tint: [f64; 3],
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Grid,
    Staggered,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSection {
    pub layout: LayoutKind,
    #[serde(default)]
    pub rows: usize,
    #[serde(default)]
    pub cols: usize,
    /// mm.
    #[serde(default)]
    pub spacing: f64,
    /// mm.
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<[f64; 2]>,
    pub radius_px: f64,
    pub darkness: f64,
    /// Contact subsampling stride for the dilate sum, pixels.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    4
}

impl Default for MarkerSection {
    fn default() -> Self {
        let style = MarkerStyle::default();
        Self {
            layout: LayoutKind::Grid,
            rows: 7,
            cols: 9,
            spacing: 2.0,
            origin: [1.6, 1.2],
            positions: Vec::new(),
            radius_px: style.radius_px,
            darkness: style.darkness,
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    /// 1/mm².
    pub lambda_d: f64,
    /// 1/mm².
    pub lambda_s: f64,
    /// 1/mm².
    pub lambda_t: f64,
    /// mm.
    #[serde(default = "default_shear_max")]
    pub shear_max: f64,
    /// Degrees.
    #[serde(default = "default_twist_max")]
    pub twist_max_deg: f64,
}

fn default_shear_max() -> f64 {
    MotionCoefficients::default().shear_max
}

fn default_twist_max() -> f64 {
    MotionCoefficients::default().twist_max_deg
}

impl Default for MotionSection {
    fn default() -> Self {
        MotionSection::from(&MotionCoefficients::default())
    }
}

impl From<&MotionCoefficients> for MotionSection {
    fn from(c: &MotionCoefficients) -> Self {
        Self {
            lambda_d: c.lambda_d,
            lambda_s: c.lambda_s,
            lambda_t: c.lambda_t,
            shear_max: c.shear_max,
            twist_max_deg: c.twist_max_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub schema_version: u32,
    pub sensor: SensorSection,
    #[serde(default)]
    pub optics: OpticsSection,
    #[serde(default)]
    pub shadow: ShadowSection,
    #[serde(default)]
    pub lights: Vec<LightEntry>,
    #[serde(default)]
    pub markers: MarkerSection,
    #[serde(default)]
    pub motion: MotionSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

impl SensorConfig {
    /// Parses and validates config text. File references are not checked.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SensorConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `from_toml_str(to_toml_string())` is lossless.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// The bundled configuration for `name` (`digit` or `gelsight`).
    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "digit" => Self::from_toml_str(DIGIT_TOML),
            "gelsight" => Self::from_toml_str(GELSIGHT_TOML),
            other => Err(Error::invalid(format!("no bundled config named `{other}` (try digit, gelsight)"))),
        }
    }

    pub fn bundled_text(name: &str) -> Option<&'static str> {
        match name {
            "digit" => Some(DIGIT_TOML),
            "gelsight" => Some(GELSIGHT_TOML),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn v(path: impl Into<String>, message: impl Into<String>) -> Error {
            Error::validation(path, message)
        }
        if self.schema_version != SCHEMA_VERSION {
            return Err(v(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let s = &self.sensor;
        if s.name.trim().is_empty() {
            return Err(v("sensor.name", "must not be empty"));
        }
        if s.width < 3 {
            return Err(v("sensor.width", format!("must be >= 3, got {}", s.width)));
        }
        if s.height < 3 {
            return Err(v("sensor.height", format!("must be >= 3, got {}", s.height)));
        }
        if !(s.pitch.is_finite() && s.pitch > 0.0) {
            return Err(v("sensor.pitch", format!("must be > 0, got {}", s.pitch)));
        }
        if !(s.contact_threshold.is_finite() && s.contact_threshold > 0.0) {
            return Err(v("sensor.contact_threshold", format!("must be > 0, got {}", s.contact_threshold)));
        }
        if self.optics.kernels.is_empty() {
            return Err(v("optics.kernels", "at least one smoothing kernel is required"));
        }
        for (i, k) in self.optics.kernels.iter().enumerate() {
            GaussianKernel::new(k.size, k.sigma)
                .validate()
                .map_err(|e| v(format!("optics.kernels[{i}]"), e.to_string()))?;
        }
        let plane = self.shadow_plane()?;
        if !(self.shadow.feather_sigma.is_finite() && self.shadow.feather_sigma >= 0.0) {
            return Err(v("shadow.feather_sigma", "must be >= 0"));
        }
        for (i, l) in self.lights.iter().enumerate() {
            let light = light_from_entry(l).map_err(|e| match e {
                Error::Validation { path, message } => v(format!("lights[{i}].{path}"), message),
                other => other,
            })?;
            light.validate(&plane).map_err(|e| v(format!("lights[{i}]"), e.to_string()))?;
        }
        let m = &self.markers;
        if m.stride == 0 {
            return Err(v("markers.stride", "must be >= 1"));
        }
        MarkerStyle { radius_px: m.radius_px, darkness: m.darkness }
            .validate()
            .map_err(|e| v("markers", e.to_string()))?;
        match m.layout {
            LayoutKind::Grid | LayoutKind::Staggered => {
                if m.rows == 0 || m.cols == 0 {
                    return Err(v("markers.rows", "grid layouts need rows >= 1 and cols >= 1"));
                }
                if !(m.spacing.is_finite() && m.spacing > 0.0) {
                    return Err(v("markers.spacing", format!("must be > 0, got {}", m.spacing)));
                }
            }
            LayoutKind::Explicit => {
                if m.positions.is_empty() {
                    return Err(v("markers.positions", "explicit layout needs positions"));
                }
            }
        }
        self.marker_field().map_err(|e| v("markers", e.to_string()))?;
        self.motion().validate().map_err(|e| match e {
            Error::Validation { path, message } => v(format!("motion.{path}"), message),
            other => other,
        })?;
        Ok(())
    }

    /// Checks that referenced files exist, resolving against `base`.
    pub fn check_files(&self, base: &Path) -> Result<()> {
        for (what, p) in [
            ("optics.model", &self.optics.model),
            ("optics.background", &self.optics.background),
            ("optics.background_depth", &self.optics.background_depth),
        ] {
            if let Some(p) = p {
                let full = base.join(p);
                if !full.is_file() {
                    return Err(Error::MissingFile { path: full, what: format!("referenced by `{what}`") });
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        base.join(p)
    }

    pub fn sensor_geometry(&self) -> SensorGeometry {
        SensorGeometry { width: self.sensor.width, height: self.sensor.height, pitch: self.sensor.pitch }
    }

    pub fn kernels(&self) -> Vec<GaussianKernel> {
        self.optics.kernels.iter().map(|k| GaussianKernel::new(k.size, k.sigma)).collect()
    }

    pub fn shade_params(&self) -> ShadeParams {
        ShadeParams {
            kernels: self.kernels(),
            threshold: self.sensor.contact_threshold,
            blend_width: self.optics.blend_width,
            parallel: false,
        }
    }

    pub fn mask_params(&self) -> MaskParams {
        MaskParams { threshold: self.sensor.contact_threshold, feather_sigma: self.shadow.feather_sigma }
    }

    pub fn shadow_plane(&self) -> Result<ShadowPlane> {
        let p = &self.shadow.plane;
        ShadowPlane::new(Vec3::from(p.normal), p.offset).map_err(|e| Error::validation("shadow.plane", e.to_string()))
    }

    pub fn light_rig(&self) -> Result<LightRig> {
        Ok(LightRig {
            lights: self.lights.iter().map(light_from_entry).collect::<Result<_>>()?,
            plane: self.shadow_plane()?,
        })
    }

    /// Replaces the lights with those of `rig`.
    pub fn set_light_rig(&mut self, rig: &LightRig) {
        self.lights = rig.lights.iter().map(entry_from_light).collect();
        self.shadow.plane = PlaneSection { normal: rig.plane.normal().into(), offset: rig.plane.offset() };
    }

    pub fn marker_layout(&self) -> MarkerLayout {
        let m = &self.markers;
        let origin = (m.origin[0], m.origin[1]);
        match m.layout {
            LayoutKind::Grid => MarkerLayout::Grid { rows: m.rows, cols: m.cols, spacing: m.spacing, origin },
            LayoutKind::Staggered => MarkerLayout::Staggered { rows: m.rows, cols: m.cols, spacing: m.spacing, origin },
            LayoutKind::Explicit => MarkerLayout::Explicit(m.positions.iter().map(|p| (p[0], p[1])).collect()),
        }
    }

    pub fn marker_field(&self) -> Result<MarkerField> {
        let style = MarkerStyle { radius_px: self.markers.radius_px, darkness: self.markers.darkness };
        MarkerField::from_layout(&self.marker_layout(), &self.sensor_geometry(), style)
    }

    pub fn motion(&self) -> MotionCoefficients {
        let m = &self.motion;
        MotionCoefficients {
            lambda_d: m.lambda_d,
            lambda_s: m.lambda_s,
            lambda_t: m.lambda_t,
            shear_max: m.shear_max,
            twist_max_deg: m.twist_max_deg,
        }
    }

    pub fn set_motion(&mut self, c: &MotionCoefficients) {
        self.motion = MotionSection::from(c);
    }
}

fn light_from_entry(l: &LightEntry) -> Result<LightSource> {
    match l.kind {
        LightKindName::Point => {
            let p = l.position.ok_or_else(|| Error::validation("position", "point lights need a position"))?;
            if l.direction.is_some() {
                return Err(Error::validation("direction", "point lights take a position, not a direction"));
            }
            Ok(LightSource::point(Vec3::from(p), l.tint, l.strength))
        }
        LightKindName::Directional => {
            let d = l.direction.ok_or_else(|| Error::validation("direction", "directional lights need a direction"))?;
            if l.position.is_some() {
                return Err(Error::validation("position", "directional lights take a direction, not a position"));
            }
            Ok(LightSource::directional(Vec3::from(d), l.tint, l.strength))
        }
    }
}

fn entry_from_light(l: &LightSource) -> LightEntry {
    use crate::shadow::LightKind;
    match l.kind {
        LightKind::Point { position } => LightEntry {
            kind: LightKindName::Point,
            position: Some(position.into()),
            direction: None,
            tint: l.tint,
            strength: l.strength,
        },
        LightKind::Directional { direction } => LightEntry {
            kind: LightKindName::Directional,
            position: None,
            direction: Some(direction.into()),
            tint: l.tint,
            strength: l.strength,
        },
    }
}

/// Loads, validates and checks file references of a config.
pub fn load_config(path: &Path) -> Result<SensorConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile { path: path.to_path_buf(), what: "sensor config".into() },
        _ => Error::Io(e),
    })?;
    let cfg = SensorConfig::from_toml_str(&text)?;
    cfg.check_files(path.parent().unwrap_or(Path::new(".")))?;
    Ok(cfg)
}

pub fn save_config(cfg: &SensorConfig, path: &Path) -> Result<()> {
    cfg.validate()?;
    std::fs::write(path, cfg.to_toml_string()?)?;
    Ok(())
}
