//! Synthetic contact geometry: parametric indenters pressed into a flat gel.
//!
//! Heights are penetration depths in mm measured from the undeformed gel plane,
//! so every map produced here is already "foreground" (background subtracted).

use crate::error::{Error, Result};
use crate::raster::HeightMap;

/// Default contact threshold in mm.
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.05;

/// Raster layout of the sensor's active area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorGeometry {
    pub width: usize,
    pub height: usize,
    /// mm per pixel.
    pub pitch: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self { width: 320, height: 240, pitch: 0.06 }
    }
}

impl SensorGeometry {
    /// Extent of the sampled area in mm, `(x_max, y_max)`.
    pub fn extent(&self) -> (f64, f64) {
        ((self.width.saturating_sub(1)) as f64 * self.pitch, (self.height.saturating_sub(1)) as f64 * self.pitch)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (w, h) = self.extent();
        (0.0..=w).contains(&x) && (0.0..=h).contains(&y)
    }

    /// Position of the central pixel `(width / 2, height / 2)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.width / 2) as f64 * self.pitch, (self.height / 2) as f64 * self.pitch)
    }
}

/// Parametric indenter. Lengths in mm, in-plane orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndenterShape {
    Sphere {
        radius: f64,
    },
    /// Cylinder lying on its side, axis parallel to the gel.
    Cylinder {
        radius: f64,
        length: f64,
        yaw_deg: f64,
    },
    /// Flat-faced box; the pressed face is `width` x `length`.
    Cuboid {
        width: f64,
        length: f64,
        yaw_deg: f64,
    },
    /// Triangular prism pressed ridge-first; `width` and `ridge_height` describe the triangle.
    Prism {
        width: f64,
        ridge_height: f64,
        length: f64,
        yaw_deg: f64,
    },
    /// Cone pressed apex-first.
    Cone {
        radius: f64,
        height: f64,
    },
}

impl IndenterShape {
    pub fn sphere(radius: f64) -> Self {
        IndenterShape::Sphere { radius }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IndenterShape::Sphere { .. } => "sphere",
            IndenterShape::Cylinder { .. } => "cylinder",
            IndenterShape::Cuboid { .. } => "cuboid",
            IndenterShape::Prism { .. } => "prism",
            IndenterShape::Cone { .. } => "cone",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims: &[(&str, f64)] = match *self {
            IndenterShape::Sphere { radius } => &[("radius", radius)][..],
            IndenterShape::Cylinder { radius, length, .. } => &[("radius", radius), ("length", length)][..],
            IndenterShape::Cuboid { width, length, .. } => &[("width", width), ("length", length)][..],
            IndenterShape::Prism { width, ridge_height, length, .. } => {
                &[("width", width), ("ridge_height", ridge_height), ("length", length)][..]
            }
            IndenterShape::Cone { radius, height } => &[("radius", radius), ("height", height)][..],
        };
        for (name, v) in dims {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidShape(format!("{} {name} must be strictly positive, got {v}", self.name())));
            }
        }
        Ok(())
    }

    /// Radius of a disk centered on the pose that encloses the footprint, for
    /// bounding the raster scan.
    fn bounding_radius(&self) -> f64 {
        match *self {
            IndenterShape::Sphere { radius } => radius,
            IndenterShape::Cylinder { radius, length, .. } => radius.hypot(length / 2.0),
            IndenterShape::Cuboid { width, length, .. } => (width / 2.0).hypot(length / 2.0),
            IndenterShape::Prism { width, length, .. } => (width / 2.0).hypot(length / 2.0),
            IndenterShape::Cone { radius, .. } => radius,
        }
    }

    /// Penetration below the gel plane at in-plane offset `(dx, dy)` from the
    /// pose center, for an indenter whose lowest point sits `depth` mm deep.
    pub fn penetration(&self, dx: f64, dy: f64, depth: f64) -> f64 {
        let rotate = |yaw_deg: f64| {
            let (s, c) = yaw_deg.to_radians().sin_cos();
            (c * dx + s * dy, -s * dx + c * dy)
        };
        let lift = match *self {
            IndenterShape::Sphere { radius } => {
                let rho2 = dx * dx + dy * dy;
                if rho2 >= radius * radius {
                    return 0.0;
                }
                radius - (radius * radius - rho2).sqrt()
            }
            IndenterShape::Cylinder { radius, length, yaw_deg } => {
                let (along, across) = rotate(yaw_deg);
                if along.abs() > length / 2.0 || across.abs() >= radius {
                    return 0.0;
                }
                radius - (radius * radius - across * across).sqrt()
            }
            IndenterShape::Cuboid { width, length, yaw_deg } => {
                let (along, across) = rotate(yaw_deg);
                if along.abs() > length / 2.0 || across.abs() > width / 2.0 {
                    return 0.0;
                }
                0.0
            }
            IndenterShape::Prism { width, ridge_height, length, yaw_deg } => {
                let (along, across) = rotate(yaw_deg);
                if along.abs() > length / 2.0 || across.abs() > width / 2.0 {
                    return 0.0;
                }
                across.abs() * ridge_height / (width / 2.0)
            }
            IndenterShape::Cone { radius, height } => {
                let rho = dx.hypot(dy);
                if rho > radius {
                    return 0.0;
                }
                rho * height / radius
            }
        };
        (depth - lift).max(0.0)
    }
}

/// Static contact pose in gel-plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPose {
    /// mm.
    pub center: (f64, f64),
    /// Penetration depth of the lowest indenter point, mm.
    pub depth: f64,
    /// Tangential translation of the contact, mm.
    pub shear: (f64, f64),
    /// In-plane rotation of the contact, degrees.
    pub twist_deg: f64,
}

impl ContactPose {
    pub fn pressed(center: (f64, f64), depth: f64) -> Self {
        Self { center, depth, shear: (0.0, 0.0), twist_deg: 0.0 }
    }

    pub fn validate(&self, sensor: &SensorGeometry) -> Result<()> {
        if !(self.depth.is_finite() && self.depth >= 0.0) {
            return Err(Error::invalid(format!("pose depth must be >= 0, got {}", self.depth)));
        }
        if !(self.twist_deg.is_finite() && self.twist_deg.abs() <= 180.0) {
            return Err(Error::invalid(format!("pose twist must lie in [-180, 180] degrees, got {}", self.twist_deg)));
        }
        if !(self.shear.0.is_finite() && self.shear.1.is_finite()) {
            return Err(Error::invalid("pose shear must be finite"));
        }
        let (x, y) = self.center;
        if !sensor.contains(x, y) {
            let (w, h) = sensor.extent();
            return Err(Error::OutOfBounds { x, y, width: w, height: h });
        }
        Ok(())
    }
}

/// Presses `shape` into the gel at `pose` and samples the penetration field.
pub fn render_height_map(shape: &IndenterShape, pose: &ContactPose, sensor: &SensorGeometry) -> Result<HeightMap> {
    shape.validate()?;
    pose.validate(sensor)?;
    let mut hm = HeightMap::zeros(sensor.width, sensor.height, sensor.pitch);
    if pose.depth == 0.0 {
        return Ok(hm);
    }
    let reach = shape.bounding_radius();
    let (cx, cy) = pose.center;
    let p = sensor.pitch;
    let col_lo = (((cx - reach) / p).floor().max(0.0)) as usize;
    let row_lo = (((cy - reach) / p).floor().max(0.0)) as usize;
    let col_hi = (((cx + reach) / p).ceil() as usize).min(sensor.width - 1);
    let row_hi = (((cy + reach) / p).ceil() as usize).min(sensor.height - 1);
    for row in row_lo..=row_hi {
        let dy = row as f64 * p - cy;
        for col in col_lo..=col_hi {
            let dx = col as f64 * p - cx;
            let h = shape.penetration(dx, dy, pose.depth);
            if h > 0.0 {
                hm.set(col, row, h as f32);
            }
        }
    }
    Ok(hm)
}

/// Heights relative to a no-contact reference depth map: `max(0, background - depth)`.
///
/// This is how depth from a curved gel (or an external physics engine) is
/// reduced to a planar height map.
pub fn extract_foreground(depth: &HeightMap, background: &HeightMap) -> Result<HeightMap> {
    if depth.dims() != background.dims() {
        return Err(Error::DimensionMismatch { expected: background.dims(), actual: depth.dims() });
    }
    let data = depth.data().iter().zip(background.data()).map(|(d, b)| (b - d).max(0.0)).collect();
    Ok(HeightMap::from_vec_unchecked(depth.width(), depth.height(), depth.pitch(), data))
}

/// One sample of the contact region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// Gel-plane position, mm.
    pub position: (f64, f64),
    /// Height relative to the undeformed surface, mm.
    pub dh: f64,
    /// Gel-plane area represented by the sample, mm^2.
    pub area: f64,
}

/// Contact pixels plus the rigid loads acting through the projection point `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactState {
    pub points: Vec<ContactPoint>,
    /// Projection of the object origin onto the gel, mm.
    pub origin: (f64, f64),
    pub shear: (f64, f64),
    pub twist_deg: f64,
}

impl ContactState {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Area-weighted centroid of the contact footprint, if any.
    pub fn footprint_centroid(&self) -> Option<(f64, f64)> {
        let total: f64 = self.points.iter().map(|p| p.area).sum();
        if total <= 0.0 {
            return None;
        }
        let (sx, sy) =
            self.points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.area * p.position.0, sy + p.area * p.position.1));
        Some((sx / total, sy / total))
    }

    /// Coarsens the contact set onto a `stride` x `stride` cell grid.
    ///
    /// Each occupied cell becomes one sample at its height-weighted centroid,
    /// carrying the mean height and the summed area, so the total of
    /// `dh * area` and its first moment are preserved exactly.
    pub fn subsampled(&self, stride: usize, pitch: f64) -> ContactState {
        if stride <= 1 || self.points.is_empty() {
            return self.clone();
        }
        let cell = stride as f64 * pitch;
        let mut cells: std::collections::BTreeMap<(i64, i64), [f64; 5]> = Default::default();
        for p in &self.points {
            let key = ((p.position.0 / cell + 1e-9).floor() as i64, (p.position.1 / cell + 1e-9).floor() as i64);
            let w = p.dh * p.area;
            let acc = cells.entry(key).or_insert([0.0; 5]);
            acc[0] += w;
            acc[1] += w * p.position.0;
            acc[2] += w * p.position.1;
            acc[3] += p.area;
            acc[4] += 1.0;
        }
        let points = cells
            .values()
            .filter(|acc| acc[0] > 0.0)
            .map(|acc| ContactPoint { position: (acc[1] / acc[0], acc[2] / acc[0]), dh: acc[0] / acc[3], area: acc[3] })
            .collect();
        ContactState { points, origin: self.origin, shear: self.shear, twist_deg: self.twist_deg }
    }
}

fn contact_points(hm: &HeightMap, threshold: f64) -> Vec<ContactPoint> {
    let area = hm.pitch() * hm.pitch();
    let t = threshold as f32;
    let mut points = Vec::new();
    for row in 0..hm.height() {
        let line = &hm.data()[row * hm.width()..(row + 1) * hm.width()];
        for (col, h) in line.iter().enumerate() {
            if *h > t {
                points.push(ContactPoint { position: hm.position(col, row), dh: *h as f64, area });
            }
        }
    }
    points
}

/// Extracts the contact set (pixels above `threshold` mm) and attaches the pose loads.
pub fn contact_state(hm: &HeightMap, pose: &ContactPose, threshold: f64) -> Result<ContactState> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::invalid(format!("contact threshold must be > 0, got {threshold}")));
    }
    Ok(ContactState {
        points: contact_points(hm, threshold),
        origin: pose.center,
        shear: pose.shear,
        twist_deg: pose.twist_deg,
    })
}

/// Like [`contact_state`], for when the object origin projection is unknown:
/// `G` is taken as the footprint centroid.
pub fn contact_state_from_footprint(
    hm: &HeightMap,
    shear: (f64, f64),
    twist_deg: f64,
    threshold: f64,
) -> Result<ContactState> {
    let pose = ContactPose { center: (0.0, 0.0), depth: 0.0, shear, twist_deg };
    let mut state = contact_state(hm, &pose, threshold)?;
    if let Some(c) = state.footprint_centroid() {
        state.origin = c;
    }
    Ok(state)
}
