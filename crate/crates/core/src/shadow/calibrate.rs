//! Light calibration from ball contacts and their shadow vertices.

use nalgebra::Matrix3;

use super::light::{LightKind, LightRig, LightSource};
use super::projection::Vec3;
use crate::error::{Error, Result};
use crate::raster::TactileImage;

/// Direction from the shadow vertex `q_s` (on the plane) toward the light,
/// grazing a ball of radius `r` centred on the plane at `o`.
pub fn tangent_ray(o: (f64, f64), r: f64, q_s: (f64, f64)) -> Result<Vec3> {
    let (dx, dy) = (o.0 - q_s.0, o.1 - q_s.1);
    let dist = dx.hypot(dy);
    if !(r >= 0.0) || dist <= r {
        return Err(Error::Degenerate(format!(
            "shadow vertex lies within the ball footprint (distance {dist:.4} mm, radius {r:.4} mm)"
        )));
    }
    let vertical = dist * (r / dist).asin().tan();
    Ok(Vec3::new(dx, dy, vertical).normalize())
}

/// As [`tangent_ray`], for a ball whose centre sits at height `z_c` above
/// (negative: below) the plane.
pub fn tangent_ray_elevated(o: (f64, f64), z_c: f64, r: f64, q_s: (f64, f64)) -> Result<Vec3> {
    let (dx, dy) = (o.0 - q_s.0, o.1 - q_s.1);
    let dist = dx.hypot(dy);
    let reach = dist.hypot(z_c);
    if !(r >= 0.0) || reach <= r || dist <= 0.0 {
        return Err(Error::Degenerate(format!(
            "shadow vertex lies within the ball (distance {reach:.4} mm, radius {r:.4} mm)"
        )));
    }
    let elevation = z_c.atan2(dist) + (r / reach).asin();
    if elevation >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Degenerate("tangent ray is vertical or beyond".into()));
    }
    Ok(Vec3::new(dx / dist * elevation.cos(), dy / dist * elevation.cos(), elevation.sin()))
}

/// A line `anchor + t·direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    pub anchor: Vec3,
    pub direction: Vec3,
}

/// Least-squares nearest point to a set of lines and the RMS of the
/// perpendicular distances to it.
pub fn nearest_point_of_lines(lines: &[Line3]) -> Result<(Vec3, f64)> {
    if lines.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 lines, got {}", lines.len())));
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vec3::zeros();
    let mut units = Vec::with_capacity(lines.len());
    for line in lines {
        let d = line.direction.normalize();
        if !d.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("line direction must be non-zero and finite"));
        }
        let p = Matrix3::identity() - d * d.transpose();
        a += p;
        b += p * line.anchor;
        units.push(d);
    }
    let eig = a.symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if lo <= 1e-10 * hi.max(1.0) {
        return Err(Error::RankDeficient("lines are (nearly) parallel".into()));
    }
    let x = a.lu().solve(&b).ok_or_else(|| Error::RankDeficient("normal matrix is singular".into()))?;
    let ss: f64 = lines
        .iter()
        .zip(&units)
        .map(|(l, d)| {
            let v = x - l.anchor;
            (v - d * d.dot(&v)).norm_squared()
        })
        .sum();
    Ok((x, (ss / lines.len() as f64).sqrt()))
}

/// One calibration contact: ball footprint plus the shadow vertex seen for
/// each light of the rig (`None` where no shadow was detected).
#[derive(Debug, Clone, PartialEq)]
pub struct BallCapture {
    /// Ball centre in the gel plane (mm).
    pub center: (f64, f64),
    /// Ball radius (mm).
    pub radius: f64,
    /// Height of the ball centre above the shadow plane; `None` places it on
    /// the plane.
    pub center_height: Option<f64>,
    pub vertices: Vec<Option<(f64, f64)>>,
}

impl BallCapture {
    fn ray(&self, q: (f64, f64)) -> Result<Vec3> {
        match self.center_height {
            Some(z) => tangent_ray_elevated(self.center, z, self.radius, q),
            None => tangent_ray(self.center, self.radius, q),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightResidual {
    pub light: usize,
    pub kind: &'static str,
    pub images_used: usize,
    /// RMS line distance (mm) for point lights, RMS angle to the mean ray
    /// (degrees) for directional ones.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightCalibrationReport {
    pub residuals: Vec<LightResidual>,
}

impl LightCalibrationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("light calibration\n");
        for r in &self.residuals {
            let unit = if r.kind == "point" { "mm" } else { "deg" };
            s.push_str(&format!("light {} {}: images={} rms={:.6} {}\n", r.light, r.kind, r.images_used, r.rms, unit));
        }
        s
    }
}

/// Recovers light positions (point) and directions (directional) from the
/// shadow vertices; the template supplies light kinds, tints, strengths and
/// the plane.
pub fn calibrate_lights(captures: &[BallCapture], template: &LightRig) -> Result<(LightRig, LightCalibrationReport)> {
    let mut rig = template.clone();
    let mut residuals = Vec::with_capacity(rig.lights.len());
    let normal = rig.plane.normal();
    let offset = rig.plane.offset();
    for (i, light) in rig.lights.iter_mut().enumerate() {
        let mut rays = Vec::new();
        for cap in captures {
            if let Some(Some(q)) = cap.vertices.get(i) {
                rays.push((*q, cap.ray(*q)?));
            }
        }
        match light.kind {
            LightKind::Point { .. } => {
                if rays.len() < 2 {
                    return Err(Error::InsufficientData(format!(
                        "point light {i} needs at least 2 images with a shadow vertex, got {}",
                        rays.len()
                    )));
                }
                let lines: Vec<Line3> =
                    rays.iter().map(|(q, d)| Line3 { anchor: on_plane(*q, normal, offset), direction: *d }).collect();
                let (position, rms) =
                    nearest_point_of_lines(&lines).map_err(|e| Error::RankDeficient(format!("light {i}: {e}")))?;
                light.kind = LightKind::Point { position };
                residuals.push(LightResidual { light: i, kind: "point", images_used: rays.len(), rms });
            }
            LightKind::Directional { .. } => {
                if rays.is_empty() {
                    return Err(Error::InsufficientData(format!(
                        "directional light {i} needs at least 1 image with a shadow vertex"
                    )));
                }
                let mean: Vec3 = rays.iter().map(|(_, d)| *d).sum::<Vec3>() / rays.len() as f64;
                if mean.norm() < 1e-12 {
                    return Err(Error::Degenerate(format!("light {i}: tangent rays cancel")));
                }
                let toward = mean.normalize();
                let ms: f64 =
                    rays.iter().map(|(_, d)| d.dot(&toward).clamp(-1.0, 1.0).acos().to_degrees().powi(2)).sum::<f64>()
                        / rays.len() as f64;
                light.kind = LightKind::Directional { direction: -toward };
                residuals.push(LightResidual {
                    light: i,
                    kind: "directional",
                    images_used: rays.len(),
                    rms: ms.sqrt(),
                });
            }
        }
    }
    Ok((rig, LightCalibrationReport { residuals }))
}

/// Lifts an in-plane (x, y) onto the plane along its normal's z component.
fn on_plane(q: (f64, f64), normal: Vec3, offset: f64) -> Vec3 {
    if normal.z.abs() < 1e-12 {
        return Vec3::new(q.0, q.1, 0.0);
    }
    let z = -(normal.x * q.0 + normal.y * q.1 + offset) / normal.z;
    Vec3::new(q.0, q.1, z)
}

/// Binary shadow mask of `image` against `background` for a light of the
/// given tint: tint-weighted relative channel drop above `min_drop`, outside
/// a disc of radius `exclude.2` around `(exclude.0, exclude.1)` (mm).
pub fn segment_shadow(
    image: &TactileImage,
    background: &TactileImage,
    tint: [f64; 3],
    min_drop: f64,
    pitch: f64,
    exclude: (f64, f64, f64),
) -> Result<Vec<bool>> {
    background.ensure_dims(image.dims())?;
    let tsum: f64 = tint.iter().sum();
    if tsum <= 0.0 {
        return Err(Error::invalid("shadow tint must have a positive component"));
    }
    let (w, h) = image.dims();
    let mut mask = vec![false; w * h];
    for row in 0..h {
        for col in 0..w {
            let (x, y) = (col as f64 * pitch, row as f64 * pitch);
            if (x - exclude.0).hypot(y - exclude.1) <= exclude.2 {
                continue;
            }
            let a = image.pixel(col, row);
            let b = background.pixel(col, row);
            let mut score = 0.0;
            for c in 0..3 {
                let bg = b[c] as f64;
                if bg > 0.0 {
                    score += tint[c] * ((bg - a[c] as f64) / bg).max(0.0);
                }
            }
            mask[row * w + col] = score / tsum > min_drop;
        }
    }
    Ok(mask)
}

/// Unit in-plane vector from `center` toward the centroid of the mask, i.e.
/// the direction the shadow falls.
pub fn shadow_azimuth(mask: &[bool], width: usize, pitch: f64, center: (f64, f64)) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        sx += (i % width) as f64 * pitch;
        sy += (i / width) as f64 * pitch;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let (dx, dy) = (sx / n as f64 - center.0, sy / n as f64 - center.1);
    let len = dx.hypot(dy);
    (len > 1e-9).then(|| (dx / len, dy / len))
}

/// Shadow vertex: the mask pixel farthest from `center` along `azimuth`.
pub fn detect_shadow_vertex(
    mask: &[bool],
    width: usize,
    pitch: f64,
    center: (f64, f64),
    azimuth: (f64, f64),
) -> Option<(f64, f64)> {
    mask.iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| ((i % width) as f64 * pitch, (i / width) as f64 * pitch))
        .map(|(x, y)| (x, y, (x - center.0) * azimuth.0 + (y - center.1) * azimuth.1))
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .map(|(x, y, _)| (x, y))
}

/// Sub-pixel shadow vertex.
///
/// For each lateral pixel column (across `azimuth`) the farthest mask pixel
/// along `azimuth` traces the shadow's far outline. The maximum of a parabola
/// fitted to the outline within `window` mm of the tip gives the tip distance,
/// pushed half a pixel outward since pixel centres lie inside the shadow.
/// A ball's shadow is symmetric about the azimuth line through `center`, so
/// the vertex is placed on that line; the lateral apex of a nearly flat
/// outline is far noisier than the centroid azimuth. Falls back to the
/// farthest pixel when the outline is too short to fit.
pub fn refine_shadow_vertex(
    mask: &[bool],
    width: usize,
    pitch: f64,
    center: (f64, f64),
    azimuth: (f64, f64),
    window: f64,
) -> Option<(f64, f64)> {
    let lateral = (-azimuth.1, azimuth.0);
    let mut outline: std::collections::BTreeMap<i64, f64> = Default::default();
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (x, y) = ((i % width) as f64 * pitch - center.0, (i / width) as f64 * pitch - center.1);
        let along = x * azimuth.0 + y * azimuth.1;
        let bin = ((x * lateral.0 + y * lateral.1) / pitch).round() as i64;
        let far = outline.entry(bin).or_insert(f64::MIN);
        *far = far.max(along);
    }
    let tip = outline.values().copied().reduce(f64::max)?;
    // several columns can share the farthest pixel; centre the window on them
    let ties: Vec<i64> = outline.iter().filter(|(_, a)| **a >= tip - 1e-9 * pitch).map(|(b, _)| *b).collect();
    let tip_l = (ties[0] + ties[ties.len() - 1]) as f64 * 0.5 * pitch;
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vec3::zeros();
    let mut used = 0;
    for (bin, along) in &outline {
        let l = *bin as f64 * pitch;
        if (l - tip_l).abs() > window || *along < tip - window {
            continue;
        }
        let f = Vec3::new(1.0, l, l * l);
        normal += f * f.transpose();
        rhs += f * *along;
        used += 1;
    }
    let fit = (used >= 3).then(|| normal.lu().solve(&rhs)).flatten();
    let along = match fit {
        // the apex may sit outside the fitted span when the outline is flat
        Some(c) if c[2] < -1e-9 => (c[0] - c[1] * c[1] / (4.0 * c[2])).clamp(tip, tip + pitch),
        _ => tip,
    };
    let along = along + 0.5 * pitch;
    Some((center.0 + along * azimuth.0, center.1 + along * azimuth.1))
}

/// Segmentation settings for [`detect_ball_shadows`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowSegmentation {
    /// Tint-weighted relative drop below the background that counts as shadow.
    pub min_drop: f64,
    /// Extra exclusion beyond the contact circle (mm), hiding the shading halo.
    pub margin: f64,
    /// Masks with fewer pixels yield no vertex.
    pub min_pixels: usize,
    /// Outline window (mm) for [`refine_shadow_vertex`]; 0 keeps the farthest pixel.
    pub tip_window: f64,
}

impl Default for ShadowSegmentation {
    fn default() -> Self {
        Self { min_drop: 0.2, margin: 0.1, min_pixels: 5, tip_window: 0.8 }
    }
}

/// Segments the shadow of every light of `rig` in one ball image and turns
/// each into a shadow vertex. `contact_radius` is the radius of the contact
/// circle; returns the capture and the per-light masks.
#[allow(clippy::too_many_arguments)]
pub fn detect_ball_shadows(
    image: &TactileImage,
    background: &TactileImage,
    rig: &LightRig,
    pitch: f64,
    center: (f64, f64),
    radius: f64,
    contact_radius: f64,
    center_height: Option<f64>,
    seg: &ShadowSegmentation,
) -> Result<(BallCapture, Vec<Vec<bool>>)> {
    let width = image.width();
    let exclude = (center.0, center.1, contact_radius + seg.margin);
    let mut vertices = Vec::with_capacity(rig.lights.len());
    let mut masks = Vec::with_capacity(rig.lights.len());
    for light in &rig.lights {
        let mask = segment_shadow(image, background, light.tint, seg.min_drop, pitch, exclude)?;
        let count = mask.iter().filter(|m| **m).count();
        let vertex = if count >= seg.min_pixels {
            shadow_azimuth(&mask, width, pitch, center).and_then(|az| {
                if seg.tip_window > 0.0 {
                    refine_shadow_vertex(&mask, width, pitch, center, az, seg.tip_window)
                } else {
                    detect_shadow_vertex(&mask, width, pitch, center, az)
                }
            })
        } else {
            None
        };
        vertices.push(vertex);
        masks.push(mask);
    }
    Ok((BallCapture { center, radius, center_height, vertices }, masks))
}

/// Strength and tint that best explain the attenuation of `image` relative
/// to `background` over the masked pixels.
pub fn estimate_attenuation(image: &TactileImage, background: &TactileImage, mask: &[bool]) -> Result<(f64, [f64; 3])> {
    background.ensure_dims(image.dims())?;
    if mask.len() != image.width() * image.height() {
        return Err(Error::LengthMismatch { left: mask.len(), right: image.width() * image.height() });
    }
    let mut ratio = [0.0f64; 3];
    let mut count = [0usize; 3];
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..3 {
            let bg = background.data()[3 * i + c] as f64;
            if bg >= 8.0 {
                ratio[c] += image.data()[3 * i + c] as f64 / bg;
                count[c] += 1;
            }
        }
    }
    if count.iter().all(|n| *n == 0) {
        return Err(Error::InsufficientData("no usable shadow pixels".into()));
    }
    let mut atten = [0.0f64; 3];
    for c in 0..3 {
        if count[c] > 0 {
            atten[c] = (1.0 - ratio[c] / count[c] as f64).clamp(0.0, 1.0);
        }
    }
    let strength = atten.iter().cloned().fold(0.0, f64::max);
    if strength <= 0.0 {
        return Ok((0.0, [1.0; 3]));
    }
    Ok((strength, atten.map(|a| a / strength)))
}

/// Fills each light's strength and tint in `rig` from masked captures;
/// `observations[i]` lists `(image, mask)` pairs for light `i`.
pub fn calibrate_attenuation(
    rig: &mut LightRig,
    background: &TactileImage,
    observations: &[Vec<(&TactileImage, Vec<bool>)>],
) -> Result<()> {
    for (i, light) in rig.lights.iter_mut().enumerate() {
        let Some(obs) = observations.get(i) else { continue };
        let mut strength = 0.0;
        let mut tint = [0.0; 3];
        let mut used = 0usize;
        for (img, mask) in obs {
            if let Ok((s, t)) = estimate_attenuation(img, background, mask) {
                strength += s;
                for c in 0..3 {
                    tint[c] += t[c];
                }
                used += 1;
            }
        }
        if used > 0 {
            *light = LightSource {
                kind: light.kind,
                tint: tint.map(|t| (t / used as f64).clamp(0.0, 1.0)),
                strength: (strength / used as f64).clamp(0.0, 1.0),
            };
        }
    }
    Ok(())
}
