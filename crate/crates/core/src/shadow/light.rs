use super::projection::{project_directional_shadow, project_point_shadow, ShadowPlane, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightKind {
    /// Position in mm (DIGIT-style LED).
    Point { position: Vec3 },
    /// Unit direction of travel (GelSight-style collimated light).
    Directional { direction: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSource {
    pub kind: LightKind,
    /// Per-channel attenuation share in `[0, 1]`.
    pub tint: [f64; 3],
    /// Overall shadow strength in `[0, 1]`.
    pub strength: f64,
}

impl LightSource {
    pub fn point(position: Vec3, tint: [f64; 3], strength: f64) -> Self {
        Self { kind: LightKind::Point { position }, tint, strength }
    }

    pub fn directional(direction: Vec3, tint: [f64; 3], strength: f64) -> Self {
        Self { kind: LightKind::Directional { direction }, tint, strength }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LightKind::Point { .. } => "point",
            LightKind::Directional { .. } => "directional",
        }
    }

    pub fn validate(&self, plane: &ShadowPlane) -> Result<()> {
        match self.kind {
            LightKind::Point { position } => {
                if !position.iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("point light position must be finite"));
                }
                if plane.signed_distance(&position).abs() < 1e-9 {
                    return Err(Error::invalid("point light lies on the shadow plane"));
                }
            }
            LightKind::Directional { direction } => {
                if (direction.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "directional light direction must be unit length (norm {})",
                        direction.norm()
                    )));
                }
            }
        }
        if self.tint.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("light tint components must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::invalid("light strength must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Projects `p` onto `plane` with the projection matching the light kind.
    pub fn project(&self, p: &Vec3, plane: &ShadowPlane) -> Result<Vec3> {
        match self.kind {
            LightKind::Point { position } => project_point_shadow(p, &position, plane),
            LightKind::Directional { direction } => project_directional_shadow(p, &direction, plane),
        }
    }

    /// Unit vector in the gel plane pointing from the light toward `at`
    /// (the direction shadows fall), if defined.
    pub fn shadow_azimuth(&self, at: (f64, f64)) -> Option<(f64, f64)> {
        let (dx, dy) = match self.kind {
            LightKind::Point { position } => (at.0 - position.x, at.1 - position.y),
            LightKind::Directional { direction } => (direction.x, direction.y),
        };
        let n = dx.hypot(dy);
        (n > 1e-12).then(|| (dx / n, dy / n))
    }
}

/// Ordered lights plus the shared receiving plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRig {
    pub lights: Vec<LightSource>,
    pub plane: ShadowPlane,
}

impl LightRig {
    pub fn validate(&self) -> Result<()> {
        if self.lights.is_empty() {
            return Err(Error::invalid("light rig needs at least one light"));
        }
        for (i, l) in self.lights.iter().enumerate() {
            l.validate(&self.plane).map_err(|e| Error::invalid(format!("light {i}: {e}")))?;
        }
        Ok(())
    }
}
