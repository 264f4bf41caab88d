use rayon::prelude::*;

use super::gradient::{gradients, SurfaceGradientMap};
use super::mlp::ReflectanceModel;
use super::smoothing::{default_pyramid, smooth_height_map, GaussianKernel};
use crate::error::{Error, Result};
use crate::raster::{HeightMap, TactileImage, WeightMap};
use crate::scene::DEFAULT_CONTACT_THRESHOLD;

#[derive(Debug, Clone, PartialEq)]
pub struct ShadeParams {
    pub kernels: Vec<GaussianKernel>,
    /// mm; smoothed heights above this are in contact.
    pub threshold: f64,
    /// Width of the alpha ramp at the region boundary, pixels.
    pub blend_width: usize,
    /// Evaluate rows in parallel on the current rayon pool.
    pub parallel: bool,
}

impl Default for ShadeParams {
    fn default() -> Self {
        Self { kernels: default_pyramid(), threshold: DEFAULT_CONTACT_THRESHOLD, blend_width: 3, parallel: false }
    }
}

impl ShadeParams {
    fn dilation(&self) -> usize {
        self.kernels.iter().map(GaussianKernel::radius).max().unwrap_or(0)
    }
}

/// Chessboard distance transform to the nearest `true` pixel, saturated at `cap`.
fn distance_to_set(set: &[bool], w: usize, h: usize, cap: u32) -> Vec<u32> {
    let inf = cap.saturating_add(1);
    let mut d: Vec<u32> = set.iter().map(|s| if *s { 0 } else { inf }).collect();
    for row in 0..h {
        for col in 0..w {
            let i = row * w + col;
            let mut best = d[i];
            if col > 0 {
                best = best.min(d[i - 1] + 1);
            }
            if row > 0 {
                best = best.min(d[i - w] + 1);
                if col > 0 {
                    best = best.min(d[i - w - 1] + 1);
                }
                if col + 1 < w {
                    best = best.min(d[i - w + 1] + 1);
                }
            }
            d[i] = best.min(inf);
        }
    }
    for row in (0..h).rev() {
        for col in (0..w).rev() {
            let i = row * w + col;
            let mut best = d[i];
            if col + 1 < w {
                best = best.min(d[i + 1] + 1);
            }
            if row + 1 < h {
                best = best.min(d[i + w] + 1);
                if col + 1 < w {
                    best = best.min(d[i + w + 1] + 1);
                }
                if col > 0 {
                    best = best.min(d[i + w - 1] + 1);
                }
            }
            d[i] = best.min(inf);
        }
    }
    d
}

/// Blend weights of the shaded region: 1 deep inside, ramping to 0 over
/// `blend_width` pixels at the boundary, exactly 0 outside.
pub fn shading_alpha(smoothed: &HeightMap, params: &ShadeParams) -> WeightMap {
    let (w, h) = smoothed.dims();
    let mut alpha = WeightMap::zeros(w, h);
    let t = params.threshold as f32;
    let data = smoothed.data();
    let Some(bbox) = bounding_box(data, w, h, |v| v > t) else {
        return alpha;
    };
    // work in a window around the contact so cost tracks contact size
    let pad = params.dilation() + params.blend_width + 1;
    let (c0, r0) = (bbox.0.saturating_sub(pad), bbox.1.saturating_sub(pad));
    let (c1, r1) = ((bbox.2 + pad).min(w - 1), (bbox.3 + pad).min(h - 1));
    let (ww, wh) = (c1 - c0 + 1, r1 - r0 + 1);
    let at = |c: usize, r: usize| data[(r + r0) * w + c + c0];

    let contact: Vec<bool> = (0..ww * wh).map(|i| at(i % ww, i / ww) > t).collect();
    let dist = distance_to_set(&contact, ww, wh, params.dilation() as u32 + 1);
    let region: Vec<bool> =
        (0..ww * wh).map(|i| dist[i] <= params.dilation() as u32 && at(i % ww, i / ww) > 0.0).collect();
    let outside: Vec<bool> = region.iter().map(|r| !r).collect();
    let bw = params.blend_width.max(1) as u32;
    let depth = distance_to_set(&outside, ww, wh, bw);
    for r in 0..wh {
        for c in 0..ww {
            let i = r * ww + c;
            if !region[i] {
                continue;
            }
            // pixels on the window edge that touch the image border are interior
            let mut d = depth[i];
            let on_image_edge = (c + c0 == 0) || (r + r0 == 0) || (c + c0 == w - 1) || (r + r0 == h - 1);
            if on_image_edge && d > bw {
                d = bw;
            }
            alpha.set(c + c0, r + r0, (d.min(bw) as f32) / bw as f32);
        }
    }
    alpha
}

fn bounding_box(data: &[f32], w: usize, h: usize, pred: impl Fn(f32) -> bool) -> Option<(usize, usize, usize, usize)> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for row in 0..h {
        for (col, v) in data[row * w..(row + 1) * w].iter().enumerate() {
            if pred(*v) {
                bb = Some(match bb {
                    None => (col, row, col, row),
                    Some((a, b, c, d)) => (a.min(col), b.min(row), c.max(col), d.max(row)),
                });
            }
        }
    }
    bb
}

/// Shades an already smoothed height map with the reflectance model and
/// blends it over `background`.
pub fn shade(
    smoothed: &HeightMap,
    model: &ReflectanceModel,
    background: &TactileImage,
    params: &ShadeParams,
) -> Result<TactileImage> {
    let (w, h) = smoothed.dims();
    background.ensure_dims((w, h))?;
    let alpha = shading_alpha(smoothed, params);
    if alpha.is_zero() {
        return Ok(background.clone());
    }
    let grads = gradients(smoothed)?;
    let mut out = background.clone();
    let shade_row = |row: usize, line: &mut [u8]| {
        let mut scratch = model.scratch();
        shade_line(row, line, &alpha, &grads, model, &mut scratch, w, h);
    };
    if params.parallel {
        out.data_mut().par_chunks_mut(w * 3).enumerate().for_each(|(row, line)| shade_row(row, line));
    } else {
        out.data_mut().chunks_mut(w * 3).enumerate().for_each(|(row, line)| shade_row(row, line));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn shade_line(
    row: usize,
    line: &mut [u8],
    alpha: &WeightMap,
    grads: &SurfaceGradientMap,
    model: &ReflectanceModel,
    scratch: &mut [f32],
    w: usize,
    h: usize,
) {
    let a_row = &alpha.data()[row * w..(row + 1) * w];
    if a_row.iter().all(|a| *a == 0.0) {
        return;
    }
    let fy = row as f32 / h as f32;
    for (col, a) in a_row.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        let (gx, gy) = grads.get(col, row);
        let rgb = model.predict_with([gx, gy, col as f32 / w as f32, fy], scratch);
        let px = &mut line[col * 3..col * 3 + 3];
        for c in 0..3 {
            let v = a * rgb[c] + (1.0 - a) * px[c] as f32;
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Smooth, then shade: the optical path without shadows.
pub fn render_optical(
    hm: &HeightMap,
    model: &ReflectanceModel,
    background: &TactileImage,
    params: &ShadeParams,
) -> Result<(TactileImage, HeightMap)> {
    let smoothed = smooth_height_map(hm, &params.kernels)?;
    let img = shade(&smoothed, model, background, params)?;
    Ok((img, smoothed))
}

/// Largest per-channel deviation between the model's zero-gradient prediction
/// and the background, sampled on a `stride` grid.
pub fn background_deviation(model: &ReflectanceModel, background: &TactileImage, stride: usize) -> Result<f64> {
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let (w, h) = background.dims();
    let mut worst = 0.0f64;
    let mut scratch = model.scratch();
    for row in (0..h).step_by(stride) {
        for col in (0..w).step_by(stride) {
            let p = model.predict_with([0.0, 0.0, col as f32 / w as f32, row as f32 / h as f32], &mut scratch);
            let bg = background.pixel(col, row);
            for c in 0..3 {
                worst = worst.max((p[c] as f64 - bg[c] as f64).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::mlp::{BatchNormParams, HiddenLayer, OutputLayer};

    /// Model with zero output weights: predicts `rgb` everywhere.
    fn constant_model(rgb: [f32; 3]) -> ReflectanceModel {
        let hidden = vec![HiddenLayer {
            inputs: 4,
            outputs: 2,
            weights: vec![0.1; 8],
            norm: BatchNormParams { mean: vec![0.0; 2], var: vec![1.0; 2], scale: vec![1.0; 2], shift: vec![0.0; 2] },
        }];
        let output = OutputLayer { inputs: 2, weights: vec![0.0; 6], bias: [0.0; 3] };
        ReflectanceModel::new([0.0; 4], [1.0; 4], hidden, output, rgb, [1.0; 3], 0).unwrap()
    }

    #[test]
    fn zero_contact_returns_background() {
        let bg = TactileImage::filled(40, 30, [90, 120, 150]);
        let hm = HeightMap::zeros(40, 30, 0.06);
        let (img, _) = render_optical(&hm, &constant_model([10.0, 10.0, 10.0]), &bg, &ShadeParams::default()).unwrap();
        assert_eq!(img, bg);
    }

    #[test]
    fn plateau_interior_is_uniform() {
        let (w, h) = (80, 60);
        let bg = TactileImage::filled(w, h, [90, 120, 150]);
        let mut hm = HeightMap::zeros(w, h, 0.06);
        for row in 15..45 {
            for col in 20..60 {
                hm.set(col, row, 0.3);
            }
        }
        let (img, _) = render_optical(&hm, &constant_model([200.0, 50.0, 25.0]), &bg, &ShadeParams::default()).unwrap();
        for row in 25..35 {
            for col in 30..50 {
                assert_eq!(img.pixel(col, row), [200, 50, 25]);
            }
        }
        assert_eq!(img.pixel(0, 0), [90, 120, 150]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bg = TactileImage::filled(10, 10, [0, 0, 0]);
        let hm = HeightMap::zeros(12, 10, 0.06);
        assert!(matches!(
            shade(&hm, &constant_model([0.0; 3]), &bg, &ShadeParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alpha_ramps_over_blend_width() {
        let mut hm = HeightMap::zeros(60, 60, 0.06);
        for row in 20..40 {
            for col in 20..40 {
                hm.set(col, row, 0.2);
            }
        }
        let params = ShadeParams { kernels: vec![GaussianKernel::new(5, 1.0)], ..ShadeParams::default() };
        let sm = smooth_height_map(&hm, &params.kernels).unwrap();
        let a = shading_alpha(&sm, &params);
        assert_eq!(a.get(30, 30), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
        let ramp: Vec<f32> = (0..30).map(|c| a.get(c, 30)).collect();
        assert!(ramp.windows(2).all(|p| p[0] <= p[1]));
        assert!(ramp.iter().any(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn parallel_matches_serial() {
        let mut hm = HeightMap::zeros(64, 48, 0.06);
        for row in 10..30 {
            for col in 12..40 {
                hm.set(col, row, 0.05 + 0.01 * ((row + col) % 7) as f32);
            }
        }
        let bg = TactileImage::filled(64, 48, [100, 110, 120]);
        let m = constant_model([30.0, 60.0, 90.0]);
        let serial = render_optical(&hm, &m, &bg, &ShadeParams::default()).unwrap().0;
        let par = render_optical(&hm, &m, &bg, &ShadeParams { parallel: true, ..ShadeParams::default() }).unwrap().0;
        assert_eq!(serial, par);
    }
}
