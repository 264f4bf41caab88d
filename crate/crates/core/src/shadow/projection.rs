//! Planar shadow projection in homogeneous coordinates.
//!
//! For a plane `π = (u, d)` (points with `u·q + d = 0`) and a light in
//! homogeneous form `L` (`(s, 1)` for a point light, `(l, 0)` for a
//! directional one) the shadow matrix is `(π·L) I - L πᵀ`.

use nalgebra::{Matrix3x4, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Receiving plane `u·q + d = 0` with unit normal `u` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowPlane {
    normal: Vec3,
    offset: f64,
}

impl ShadowPlane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && (n - 1.0).abs() <= UNIT_TOLERANCE) || !offset.is_finite() {
            return Err(Error::invalid(format!(
                "shadow plane normal must be a unit vector (norm {n}) with finite offset"
            )));
        }
        Ok(Self { normal, offset })
    }

    /// The undeformed gel plane `z = 0`.
    pub fn gel() -> Self {
        Self { normal: Vec3::new(0.0, 0.0, 1.0), offset: 0.0 }
    }

    #[inline]
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    #[inline]
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance `u·p + d`.
    #[inline]
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }
}

impl Default for ShadowPlane {
    fn default() -> Self {
        Self::gel()
    }
}

/// 4x4 point-light shadow matrix.
pub fn point_light_matrix(s: &Vec3, plane: &ShadowPlane) -> Matrix4<f64> {
    let u = plane.normal();
    let d = plane.offset();
    let us = u.dot(s);
    let k = us + d;
    Matrix4::new(
        k - u.x * s.x,
        -u.y * s.x,
        -u.z * s.x,
        -d * s.x,
        -u.x * s.y,
        k - u.y * s.y,
        -u.z * s.y,
        -d * s.y,
        -u.x * s.z,
        -u.y * s.z,
        k - u.z * s.z,
        -d * s.z,
        -u.x,
        -u.y,
        -u.z,
        us,
    )
}

/// 3x4 directional-light shadow matrix, including the `1/(u·l)` prefactor.
pub fn directional_light_matrix(l: &Vec3, plane: &ShadowPlane) -> Result<Matrix3x4<f64>> {
    let u = plane.normal();
    let d = plane.offset();
    let ul = u.dot(l);
    if ul.abs() <= 1e-12 * l.norm().max(1.0) {
        return Err(Error::SingularProjection { light: None });
    }
    let m = Matrix3x4::new(
        ul - u.x * l.x,
        -u.y * l.x,
        -u.z * l.x,
        -d * l.x,
        -u.x * l.y,
        ul - u.y * l.y,
        -u.z * l.y,
        -d * l.y,
        -u.x * l.z,
        -u.y * l.z,
        ul - u.z * l.z,
        -d * l.z,
    );
    Ok(m / ul)
}

/// Shadow of `p` cast by a point light at `s` onto `plane`.
pub fn project_point_shadow(p: &Vec3, s: &Vec3, plane: &ShadowPlane) -> Result<Vec3> {
    let m = point_light_matrix(s, plane);
    let q = m * Vector4::new(p.x, p.y, p.z, 1.0);
    let scale = plane.normal().dot(s).abs() + plane.normal().dot(p).abs() + 1.0;
    if q.w.abs() <= 1e-12 * scale || !q.w.is_finite() {
        return Err(Error::SingularProjection { light: None });
    }
    Ok(Vec3::new(q.x / q.w, q.y / q.w, q.z / q.w))
}

/// Shadow of `p` cast along direction `l` onto `plane`.
pub fn project_directional_shadow(p: &Vec3, l: &Vec3, plane: &ShadowPlane) -> Result<Vec3> {
    let m = directional_light_matrix(l, plane)?;
    Ok(m * Vector4::new(p.x, p.y, p.z, 1.0))
}
