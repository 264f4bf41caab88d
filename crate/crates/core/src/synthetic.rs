//! A reference sensor with known physics, used as ground truth when real
//! captures are unavailable.
//!
//! It shares no code with the learned optical path: the gel surface is the
//! height map blurred by a single Gaussian, shading is Phong with coloured
//! point lights, and cast shadows are found by marching rays over the height
//! map. Marker motion follows the displacement model with known coefficients
//! over every deformed pixel.

use crate::error::Result;
use crate::marker::{
    compose_motion, render_markers, ComposedMotion, MarkerField, MarkerLayout, MarkerStyle, MotionCoefficients,
};
use crate::raster::{HeightMap, TactileImage};
use crate::scene::{contact_state, ContactPose, SensorGeometry};
use crate::shadow::{LightKind, LightRig, LightSource, ShadowPlane, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhongLight {
    /// mm.
    pub position: Vec3,
    /// Per-channel intensity, 8-bit levels at normal incidence.
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSensor {
    pub sensor: SensorGeometry,
    pub lights: Vec<PhongLight>,
    pub ambient: [f64; 3],
    pub specular: f64,
    pub shininess: f64,
    /// Gel blur σ, pixels.
    pub blur_sigma_px: f64,
    /// Pixels with heights above this (mm) are in contact and receive no cast shadow.
    pub contact_threshold: f64,
    pub motion: MotionCoefficients,
    pub markers: MarkerField,
}

impl SyntheticSensor {
    /// DIGIT-like sensor: red, green and blue LEDs around a 320x240 gel.
    pub fn reference() -> Self {
        let sensor = SensorGeometry::default();
        let markers = MarkerField::from_layout(&MarkerLayout::digit_default(), &sensor, MarkerStyle::default())
            .expect("default layout fits the default sensor");
        Self {
            sensor,
            lights: vec![
                PhongLight { position: Vec3::new(-4.0, 7.2, 6.0), color: [150.0, 25.0, 20.0] },
                PhongLight { position: Vec3::new(23.0, -1.0, 6.0), color: [20.0, 150.0, 25.0] },
                PhongLight { position: Vec3::new(23.0, 15.4, 6.0), color: [25.0, 20.0, 150.0] },
            ],
            ambient: [45.0, 45.0, 50.0],
            specular: 0.15,
            shininess: 12.0,
            blur_sigma_px: 4.0,
            contact_threshold: 0.05,
            motion: MotionCoefficients {
                lambda_d: 0.8,
                lambda_s: 0.05,
                lambda_t: 0.1,
                shear_max: 1.0,
                twist_max_deg: 15.0,
            },
            markers,
        }
    }

    /// The lights as a rig template: kinds and nominal tints from the LED colours.
    pub fn rig_template(&self) -> LightRig {
        LightRig {
            lights: self
                .lights
                .iter()
                .map(|l| {
                    let m = l.color.iter().cloned().fold(0.0, f64::max);
                    LightSource::point(Vec3::new(0.0, 0.0, 1.0), l.color.map(|c| c / m), 0.5)
                })
                .collect(),
            plane: ShadowPlane::gel(),
        }
    }

    /// The true light rig (positions only; shadow strength and tint are not
    /// a property of the reference sensor).
    pub fn true_positions(&self) -> Vec<Vec3> {
        self.lights.iter().map(|l| l.position).collect()
    }

    pub fn background(&self) -> TactileImage {
        let hm = HeightMap::zeros(self.sensor.width, self.sensor.height, self.sensor.pitch);
        self.render(&hm, true)
    }

    /// Gel surface: the height map blurred by the elastomer.
    pub fn gel_surface(&self, hm: &HeightMap) -> Vec<f64> {
        blur(hm, self.blur_sigma_px)
    }

    /// `true` where light `i` is blocked, for each light.
    pub fn shadow_masks(&self, hm: &HeightMap) -> Vec<Vec<bool>> {
        self.lights
            .iter()
            .map(|l| {
                let mut m = cast_visibility(hm, &LightSource::point(l.position, [1.0; 3], 1.0));
                for (v, h) in m.iter_mut().zip(hm.data()) {
                    if *h as f64 > self.contact_threshold {
                        *v = false;
                    }
                }
                m
            })
            .collect()
    }

    /// Shaded image without markers.
    pub fn render(&self, hm: &HeightMap, shadows: bool) -> TactileImage {
        let (w, h) = hm.dims();
        let pitch = hm.pitch();
        let surf = self.gel_surface(hm);
        let masks = if shadows && !hm.is_zero() { self.shadow_masks(hm) } else { Vec::new() };
        let mut data = Vec::with_capacity(w * h * 3);
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                let (gx, gy) = central(&surf, w, h, col, row, pitch);
                let n = Vec3::new(-gx, -gy, 1.0).normalize();
                let p = Vec3::new(col as f64 * pitch, row as f64 * pitch, surf[i]);
                let mut rgb = self.ambient;
                for (k, l) in self.lights.iter().enumerate() {
                    if masks.get(k).map(|m| m[i]).unwrap_or(false) {
                        continue;
                    }
                    let to_light = (l.position - p).normalize();
                    let lambert = n.dot(&to_light).max(0.0);
                    if lambert == 0.0 {
                        continue;
                    }
                    let reflect = 2.0 * lambert * n - to_light;
                    let spec = self.specular * reflect.z.max(0.0).powf(self.shininess);
                    for (v, lc) in rgb.iter_mut().zip(l.color) {
                        *v += lc * (lambert + spec);
                    }
                }
                data.extend(rgb.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
            }
        }
        TactileImage::from_vec(w, h, data).expect("dims match")
    }

    /// Marker motion over every deformed pixel, without subsampling.
    pub fn marker_motion(&self, hm: &HeightMap, pose: &ContactPose) -> Result<ComposedMotion> {
        let state = contact_state(hm, pose, 1e-9)?;
        Ok(compose_motion(&self.markers, &state, &self.motion))
    }

    /// Shaded image with shadows and markers, plus the marker motion.
    pub fn capture(&self, hm: &HeightMap, pose: &ContactPose) -> Result<(TactileImage, ComposedMotion)> {
        let img = self.render(hm, true);
        let motion = self.marker_motion(hm, pose)?;
        let out = render_markers(&img, &motion.positions, &self.markers.style, hm.pitch())?;
        Ok((out, motion))
    }
}

fn central(s: &[f64], w: usize, h: usize, col: usize, row: usize, pitch: f64) -> (f64, f64) {
    let (l, r) = (col.saturating_sub(1), (col + 1).min(w - 1));
    let (u, d) = (row.saturating_sub(1), (row + 1).min(h - 1));
    let gx = (s[row * w + r] - s[row * w + l]) / ((r - l) as f64 * pitch);
    let gy = (s[d * w + col] - s[u * w + col]) / ((d - u) as f64 * pitch);
    (gx, gy)
}

/// Direct 2-D Gaussian convolution with zero padding (the gel is flat beyond the map).
fn blur(hm: &HeightMap, sigma: f64) -> Vec<f64> {
    let (w, h) = hm.dims();
    let src: Vec<f64> = hm.data().iter().map(|v| *v as f64).collect();
    if sigma <= 0.0 || hm.is_zero() {
        return src;
    }
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / norm).collect();
    let mut tmp = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let c = col as i64 + k as i64 - r;
                if c >= 0 && c < w as i64 {
                    acc += t * src[row * w + c as usize];
                }
            }
            tmp[row * w + col] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let rr = row as i64 + k as i64 - r;
                if rr >= 0 && rr < h as i64 {
                    acc += t * tmp[rr as usize * w + col];
                }
            }
            out[row * w + col] = acc;
        }
    }
    out
}

/// Hard cast-shadow mask of the height-map surface for one light, by
/// marching from each pixel toward the light in half-pixel steps.
pub fn cast_visibility(hm: &HeightMap, light: &LightSource) -> Vec<bool> {
    let (w, h) = hm.dims();
    let pitch = hm.pitch();
    let top = hm.max() as f64;
    let mut shadow = vec![false; w * h];
    if top <= 0.0 {
        return shadow;
    }
    for row in 0..h {
        for col in 0..w {
            let z0 = hm.get(col, row) as f64;
            let p = Vec3::new(col as f64 * pitch, row as f64 * pitch, z0);
            let dir = match light.kind {
                LightKind::Point { position } => (position - p).normalize(),
                LightKind::Directional { direction } => -direction,
            };
            if dir.z <= 0.0 {
                continue;
            }
            let horiz = dir.x.hypot(dir.y);
            if horiz < 1e-12 {
                continue;
            }
            // distance along the ray per half-pixel of horizontal travel
            let step = 0.5 * pitch / horiz;
            let mut t = step;
            loop {
                let q = p + dir * t;
                if q.z > top {
                    break;
                }
                let (c, r) = ((q.x / pitch).round(), (q.y / pitch).round());
                if c < 0.0 || r < 0.0 || c >= w as f64 || r >= h as f64 {
                    break;
                }
                if let LightKind::Point { position } = light.kind {
                    if t >= (position - p).norm() {
                        break;
                    }
                }
                if hm.get(c as usize, r as usize) as f64 > q.z + 1e-9 {
                    shadow[row * w + col] = true;
                    break;
                }
                t += step;
            }
        }
    }
    shadow
}
