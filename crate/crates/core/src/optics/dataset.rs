//! RGB-Normal calibration dataset built from sphere-indenter images.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::{luma, TactileImage};
use crate::scene::{ContactPose, IndenterShape, SensorGeometry};

/// Default relative luma drop below the background that marks a pixel as shadow.
pub const DEFAULT_SHADOW_DROP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbNormalRecord {
    pub gx: f32,
    pub gy: f32,
    /// Pixel column / row.
    pub x: f32,
    pub y: f32,
    pub rgb: [f32; 3],
    /// Index of the calibration image the record came from.
    pub image: u32,
    /// Index of the contact within that image.
    pub contact: u32,
}

impl RgbNormalRecord {
    pub fn features(&self, width: usize, height: usize) -> [f32; 4] {
        [self.gx, self.gy, self.x / width as f32, self.y / height as f32]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbNormalDataset {
    pub width: usize,
    pub height: usize,
    pub records: Vec<RgbNormalRecord>,
}

impl RgbNormalDataset {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// SHA-256 over the little-endian record fields, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        for r in &self.records {
            for v in [r.gx, r.gy, r.x, r.y, r.rgb[0], r.rgb[1], r.rgb[2]] {
                h.update(v.to_le_bytes());
            }
            h.update(r.image.to_le_bytes());
            h.update(r.contact.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One calibration capture: a sphere pressed at a known pose.
#[derive(Debug, Clone)]
pub struct CalibrationCapture<'a> {
    pub image: &'a TactileImage,
    pub pose: ContactPose,
    pub shape: IndenterShape,
    /// Optional explicit shadow annotation (row-major); `true` pixels are excluded.
    pub shadow_mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone, Copy)]
pub struct DatasetOptions {
    pub sensor: SensorGeometry,
    /// Used when a capture has no explicit shadow mask: pixels whose luma falls
    /// more than this fraction below the background are treated as shadow.
    pub shadow_drop: f64,
}

impl DatasetOptions {
    pub fn new(sensor: SensorGeometry) -> Self {
        Self { sensor, shadow_drop: DEFAULT_SHADOW_DROP }
    }
}

/// Radius of the contact circle of a sphere of `radius` pressed `depth` deep.
pub fn sphere_contact_radius(radius: f64, depth: f64) -> f64 {
    (2.0 * radius * depth - depth * depth).max(0.0).sqrt()
}

/// Collects `(analytic gradient, position) -> observed RGB` records from every
/// in-contact, non-shadow pixel of each capture.
pub fn build_rgb_normal_dataset(
    captures: &[CalibrationCapture<'_>],
    background: &TactileImage,
    opts: &DatasetOptions,
) -> Result<RgbNormalDataset> {
    let s = opts.sensor;
    background.ensure_dims((s.width, s.height))?;
    let mut ds = RgbNormalDataset::empty(s.width, s.height);
    for (index, cap) in captures.iter().enumerate() {
        let radius = match cap.shape {
            IndenterShape::Sphere { radius } => radius,
            other => {
                return Err(Error::InvalidShape(format!(
                    "calibration capture {index} uses a {}; only spheres are supported",
                    other.name()
                )))
            }
        };
        cap.shape.validate()?;
        cap.image.ensure_dims((s.width, s.height))?;
        if let Some(mask) = cap.shadow_mask {
            if mask.len() != s.width * s.height {
                return Err(Error::LengthMismatch { left: s.width * s.height, right: mask.len() });
            }
        }
        let depth = cap.pose.depth.min(radius);
        let a = sphere_contact_radius(radius, depth);
        let (cx, cy) = cap.pose.center;
        let (xmax, ymax) = s.extent();
        if cx - a < 0.0 || cy - a < 0.0 || cx + a > xmax || cy + a > ymax {
            return Err(Error::invalid(format!(
                "capture {index}: contact circle (center ({cx:.3}, {cy:.3}), radius {a:.3} mm) exceeds the image"
            )));
        }
        let p = s.pitch;
        let col_lo = ((cx - a) / p).floor().max(0.0) as usize;
        let col_hi = (((cx + a) / p).ceil() as usize).min(s.width - 1);
        let row_lo = ((cy - a) / p).floor().max(0.0) as usize;
        let row_hi = (((cy + a) / p).ceil() as usize).min(s.height - 1);
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                let dx = col as f64 * p - cx;
                let dy = row as f64 * p - cy;
                let rho2 = dx * dx + dy * dy;
                if rho2 >= a * a {
                    continue;
                }
                let i = row * s.width + col;
                let observed = cap.image.pixel(col, row);
                let shadowed = match cap.shadow_mask {
                    Some(mask) => mask[i],
                    None => luma(observed) < (1.0 - opts.shadow_drop) * luma(background.pixel(col, row)),
                };
                if shadowed {
                    continue;
                }
                let sq = (radius * radius - rho2).sqrt();
                ds.records.push(RgbNormalRecord {
                    gx: (-dx / sq) as f32,
                    gy: (-dy / sq) as f32,
                    x: col as f32,
                    y: row as f32,
                    rgb: [observed[0] as f32, observed[1] as f32, observed[2] as f32],
                    image: index as u32,
                    contact: 0,
                });
            }
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SensorGeometry {
        SensorGeometry { width: 80, height: 60, pitch: 0.06 }
    }

    #[test]
    fn no_images_no_records() {
        let s = small();
        let bg = TactileImage::filled(s.width, s.height, [100, 100, 100]);
        let ds = build_rgb_normal_dataset(&[], &bg, &DatasetOptions::new(s)).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn records_cover_contact_disk() {
        let s = small();
        let bg = TactileImage::filled(s.width, s.height, [100, 100, 100]);
        let img = TactileImage::filled(s.width, s.height, [120, 90, 80]);
        let pose = ContactPose::pressed((2.4, 1.8), 0.5);
        let cap = CalibrationCapture { image: &img, pose, shape: IndenterShape::sphere(2.0), shadow_mask: None };
        let ds = build_rgb_normal_dataset(&[cap], &bg, &DatasetOptions::new(s)).unwrap();
        let a = sphere_contact_radius(2.0, 0.5);
        // brute-force count of lattice points strictly inside the circle
        let mut expected = 0;
        for row in 0..s.height {
            for col in 0..s.width {
                let (x, y) = (col as f64 * 0.06, row as f64 * 0.06);
                if (x - 2.4).powi(2) + (y - 1.8).powi(2) < a * a {
                    expected += 1;
                }
            }
        }
        assert_eq!(ds.len(), expected);
        for r in &ds.records {
            assert_eq!(r.rgb, [120.0, 90.0, 80.0]);
            let (dx, dy) = (r.x as f64 * 0.06 - 2.4, r.y as f64 * 0.06 - 1.8);
            assert!(dx.hypot(dy) < a);
            // gradient points back toward the center
            assert!(r.gx as f64 * dx + r.gy as f64 * dy <= 0.0);
        }
    }

    #[test]
    fn fully_shadowed_contact_is_dropped() {
        let s = small();
        let bg = TactileImage::filled(s.width, s.height, [100, 100, 100]);
        let img = bg.clone();
        let mask = vec![true; s.width * s.height];
        let cap = CalibrationCapture {
            image: &img,
            pose: ContactPose::pressed((2.4, 1.8), 0.5),
            shape: IndenterShape::sphere(2.0),
            shadow_mask: Some(&mask),
        };
        let ds = build_rgb_normal_dataset(&[cap], &bg, &DatasetOptions::new(s)).unwrap();
        assert!(ds.is_empty());

        // intensity-drop detection excludes a dark image as well
        let dark = TactileImage::filled(s.width, s.height, [20, 20, 20]);
        let cap = CalibrationCapture {
            image: &dark,
            pose: ContactPose::pressed((2.4, 1.8), 0.5),
            shape: IndenterShape::sphere(2.0),
            shadow_mask: None,
        };
        assert!(build_rgb_normal_dataset(&[cap], &bg, &DatasetOptions::new(s)).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_sphere_and_out_of_bounds() {
        let s = small();
        let bg = TactileImage::filled(s.width, s.height, [100, 100, 100]);
        let cap = CalibrationCapture {
            image: &bg,
            pose: ContactPose::pressed((2.4, 1.8), 0.5),
            shape: IndenterShape::Cone { radius: 1.0, height: 1.0 },
            shadow_mask: None,
        };
        assert!(matches!(build_rgb_normal_dataset(&[cap], &bg, &DatasetOptions::new(s)), Err(Error::InvalidShape(_))));
        let cap = CalibrationCapture {
            image: &bg,
            pose: ContactPose::pressed((0.5, 1.8), 0.5),
            shape: IndenterShape::sphere(2.0),
            shadow_mask: None,
        };
        assert!(build_rgb_normal_dataset(&[cap], &bg, &DatasetOptions::new(s)).is_err());
    }
}
