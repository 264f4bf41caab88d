//! Rasterized planar shadow masks.

use super::light::{LightRig, LightSource};
use super::projection::{ShadowPlane, Vec3};
use crate::error::{Error, Result};
use crate::optics::smoothing::GaussianKernel;
use crate::raster::{HeightMap, WeightMap};
use crate::scene::DEFAULT_CONTACT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Heights above this (mm) occlude and form the silhouette.
    pub threshold: f64,
    /// Feathering Gaussian σ in pixels; 0 disables feathering.
    pub feather_sigma: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { threshold: DEFAULT_CONTACT_THRESHOLD, feather_sigma: 2.0 }
    }
}

fn draw_segment(mask: &mut WeightMap, from: (f64, f64), to: (f64, f64)) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as i64;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let c = (from.0 + t * dx).round() as i64;
        let r = (from.1 + t * dy).round() as i64;
        if c >= 0 && r >= 0 && c < w && r < h {
            mask.set(c as usize, r as usize, 1.0);
        }
    }
}

/// Shadow weight map of one light.
///
/// Every occluding column `(x, y, 0..H)` casts the segment between its foot
/// and the projection of its top; the union is rasterized, cleared inside the
/// contact silhouette and feathered.
pub fn cast_shadow_mask(
    hm: &HeightMap,
    light: &LightSource,
    plane: &ShadowPlane,
    params: &MaskParams,
) -> Result<WeightMap> {
    let (w, h) = hm.dims();
    let mut mask = WeightMap::zeros(w, h);
    let t = params.threshold as f32;
    let pitch = hm.pitch();
    let mut silhouette = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let height = hm.get(col, row);
            if height <= t {
                continue;
            }
            let (x, y) = hm.position(col, row);
            let foot = light.project(&Vec3::new(x, y, 0.0), plane)?;
            let top = light.project(&Vec3::new(x, y, height as f64), plane)?;
            draw_segment(&mut mask, (foot.x / pitch, foot.y / pitch), (top.x / pitch, top.y / pitch));
            silhouette.push(row * w + col);
        }
    }
    for i in silhouette {
        mask.data_mut()[i] = 0.0;
    }
    if params.feather_sigma > 0.0 {
        feather(&mut mask, params.feather_sigma);
    }
    Ok(mask)
}

/// One mask per light of the rig; projection failures name the light index.
pub fn cast_rig_masks(hm: &HeightMap, rig: &LightRig, params: &MaskParams) -> Result<Vec<WeightMap>> {
    rig.lights
        .iter()
        .enumerate()
        .map(|(i, light)| {
            cast_shadow_mask(hm, light, &rig.plane, params).map_err(|e| match e {
                Error::SingularProjection { .. } => Error::SingularProjection { light: Some(i) },
                other => other,
            })
        })
        .collect()
}

/// Separable Gaussian blur (clamped to edge), restricted to the mask's support.
pub(crate) fn feather(mask: &mut WeightMap, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as usize;
    let taps: Vec<f32> = GaussianKernel::new(2 * radius + 1, sigma).taps().into_iter().map(|v| v as f32).collect();
    let (w, h) = mask.dims();
    let Some((c0, r0, c1, r1)) = support(mask) else {
        return;
    };
    let (c0, r0) = (c0.saturating_sub(radius), r0.saturating_sub(radius));
    let (c1, r1) = ((c1 + radius).min(w - 1), (r1 + radius).min(h - 1));
    let src = mask.data().to_vec();
    let r = radius as isize;
    let mut tmp = vec![0.0f32; w * h];
    for row in r0..=r1 {
        for col in c0..=c1 {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                let c = (col as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += tap * src[row * w + c];
            }
            tmp[row * w + col] = acc;
        }
    }
    let out = mask.data_mut();
    for row in r0..=r1 {
        for col in c0..=c1 {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                let rr = (row as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += tap * tmp[rr * w + col];
            }
            out[row * w + col] = acc.clamp(0.0, 1.0);
        }
    }
}

fn support(mask: &WeightMap) -> Option<(usize, usize, usize, usize)> {
    let w = mask.width();
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for (i, v) in mask.data().iter().enumerate() {
        if *v != 0.0 {
            let (c, r) = (i % w, i / w);
            bb = Some(match bb {
                None => (c, r, c, r),
                Some((a, b, cc, d)) => (a.min(c), b.min(r), cc.max(c), d.max(r)),
            });
        }
    }
    bb
}
