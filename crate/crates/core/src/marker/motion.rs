//! Marker displacement under dilate, shear and twist loads.
//!
//! Each contact sample contributes `Δh · area · (M − C) · exp(−λ_d ‖M − C‖²)`.
//! The area factor makes the sum independent of the pixel pitch and of the
//! subsampling stride; a lone sample with unit area reduces to the bare
//! pointwise formula.

use super::field::MarkerField;
use crate::error::{Error, Result};
use crate::scene::ContactState;

pub type Vec2 = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCoefficients {
    /// Dilate decay, 1/mm².
    pub lambda_d: f64,
    /// Shear decay, 1/mm².
    pub lambda_s: f64,
    /// Twist decay, 1/mm².
    pub lambda_t: f64,
    /// Shear cap, mm.
    pub shear_max: f64,
    /// Twist cap, degrees.
    pub twist_max_deg: f64,
}

impl Default for MotionCoefficients {
    fn default() -> Self {
        Self { lambda_d: 1.25e-3, lambda_s: 2.10e-4, lambda_t: 3.80e-4, shear_max: 1.0, twist_max_deg: 15.0 }
    }
}

impl MotionCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_s", self.lambda_s),
            ("lambda_t", self.lambda_t),
            ("shear_max", self.shear_max),
            ("twist_max_deg", self.twist_max_deg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One 2-D displacement (mm) per marker, in marker order.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub vectors: Vec<Vec2>,
}

impl DisplacementField {
    pub fn zeros(n: usize) -> Self {
        Self { vectors: vec![(0.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.vectors.iter().all(|v| v.0 == 0.0 && v.1 == 0.0)
    }

    pub fn add(&self, other: &DisplacementField) -> Result<DisplacementField> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(DisplacementField {
            vectors: self.vectors.iter().zip(&other.vectors).map(|(a, b)| (a.0 + b.0, a.1 + b.1)).collect(),
        })
    }

    /// Applies the field to `initial` positions.
    pub fn apply(&self, initial: &[Vec2]) -> Result<Vec<Vec2>> {
        if initial.len() != self.len() {
            return Err(Error::LengthMismatch { left: initial.len(), right: self.len() });
        }
        Ok(initial.iter().zip(&self.vectors).map(|(m, d)| (m.0 + d.0, m.1 + d.1)).collect())
    }

    /// Difference `current − initial`.
    pub fn between(initial: &[Vec2], current: &[Vec2]) -> Result<Self> {
        if initial.len() != current.len() {
            return Err(Error::LengthMismatch { left: initial.len(), right: current.len() });
        }
        Ok(Self { vectors: initial.iter().zip(current).map(|(a, b)| (b.0 - a.0, b.1 - a.1)).collect() })
    }
}

pub fn dilate_at(positions: &[Vec2], contact: &ContactState, lambda_d: f64) -> Vec<Vec2> {
    positions
        .iter()
        .map(|m| {
            let (mut dx, mut dy) = (0.0, 0.0);
            for p in &contact.points {
                let (rx, ry) = (m.0 - p.position.0, m.1 - p.position.1);
                let w = p.dh * p.area * (-lambda_d * (rx * rx + ry * ry)).exp();
                dx += w * rx;
                dy += w * ry;
            }
            (dx, dy)
        })
        .collect()
}

/// Shear vector limited to `shear_max` in magnitude, direction preserved.
pub fn capped_shear(shear: Vec2, shear_max: f64) -> Vec2 {
    let mag = shear.0.hypot(shear.1);
    if mag <= shear_max || mag == 0.0 {
        shear
    } else {
        (shear.0 * shear_max / mag, shear.1 * shear_max / mag)
    }
}

pub fn shear_at(positions: &[Vec2], origin: Vec2, shear: Vec2, lambda_s: f64, shear_max: f64) -> Vec<Vec2> {
    let s = capped_shear(shear, shear_max);
    positions
        .iter()
        .map(|m| {
            let (rx, ry) = (m.0 - origin.0, m.1 - origin.1);
            let w = (-lambda_s * (rx * rx + ry * ry)).exp();
            (s.0 * w, s.1 * w)
        })
        .collect()
}

/// `Δθ = [[cos θ − 1, −sin θ], [sin θ, cos θ − 1]]` for θ clamped to ±θ_max.
pub fn twist_matrix(twist_deg: f64, twist_max_deg: f64) -> [[f64; 2]; 2] {
    let theta = twist_deg.clamp(-twist_max_deg, twist_max_deg).to_radians();
    let (s, c) = theta.sin_cos();
    [[c - 1.0, -s], [s, c - 1.0]]
}

pub fn twist_at(positions: &[Vec2], origin: Vec2, twist_deg: f64, lambda_t: f64, twist_max_deg: f64) -> Vec<Vec2> {
    let m = twist_matrix(twist_deg, twist_max_deg);
    positions
        .iter()
        .map(|p| {
            let (rx, ry) = (p.0 - origin.0, p.1 - origin.1);
            let w = (-lambda_t * (rx * rx + ry * ry)).exp();
            (w * (m[0][0] * rx + m[0][1] * ry), w * (m[1][0] * rx + m[1][1] * ry))
        })
        .collect()
}

pub fn dilate_displacement(
    markers: &MarkerField,
    contact: &ContactState,
    coeffs: &MotionCoefficients,
) -> DisplacementField {
    DisplacementField { vectors: dilate_at(markers.positions(), contact, coeffs.lambda_d) }
}

pub fn shear_displacement(
    markers: &MarkerField,
    contact: &ContactState,
    coeffs: &MotionCoefficients,
) -> DisplacementField {
    DisplacementField {
        vectors: shear_at(markers.positions(), contact.origin, contact.shear, coeffs.lambda_s, coeffs.shear_max),
    }
}

pub fn twist_displacement(
    markers: &MarkerField,
    contact: &ContactState,
    coeffs: &MotionCoefficients,
) -> DisplacementField {
    DisplacementField {
        vectors: twist_at(
            markers.positions(),
            contact.origin,
            contact.twist_deg,
            coeffs.lambda_t,
            coeffs.twist_max_deg,
        ),
    }
}

/// Current marker positions under combined load.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedMotion {
    /// `M_c`, clamped to the active area.
    pub positions: Vec<Vec2>,
    /// Unclamped sum of the three load fields.
    pub displacement: DisplacementField,
    /// Markers whose unclamped position left the active area.
    pub clamped: Vec<bool>,
}

pub fn compose_motion(markers: &MarkerField, contact: &ContactState, coeffs: &MotionCoefficients) -> ComposedMotion {
    let d = dilate_displacement(markers, contact, coeffs);
    let s = shear_displacement(markers, contact, coeffs);
    let t = twist_displacement(markers, contact, coeffs);
    let vectors: Vec<Vec2> = d
        .vectors
        .iter()
        .zip(&s.vectors)
        .zip(&t.vectors)
        .map(|((a, b), c)| (a.0 + b.0 + c.0, a.1 + b.1 + c.1))
        .collect();
    let (w, h) = markers.extent();
    let mut clamped = Vec::with_capacity(vectors.len());
    let positions = markers
        .positions()
        .iter()
        .zip(&vectors)
        .map(|(m, v)| {
            let (x, y) = (m.0 + v.0, m.1 + v.1);
            let (cx, cy) = (x.clamp(0.0, w), y.clamp(0.0, h));
            clamped.push(cx != x || cy != y);
            (cx, cy)
        })
        .collect();
    ComposedMotion { positions, displacement: DisplacementField { vectors }, clamped }
}
