//! Pyramid Gaussian smoothing of contact height maps.

use crate::error::{Error, Result};
use crate::raster::HeightMap;

/// One Gaussian pass: odd window `size` and standard deviation `sigma` in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub size: usize,
    pub sigma: f64,
}

impl GaussianKernel {
    pub const fn new(size: usize, sigma: f64) -> Self {
        Self { size, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size.is_multiple_of(2) || self.size == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {}", self.size)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("kernel sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Normalized 1-D taps; the 2-D kernel is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let r = self.radius() as isize;
        let denom = 2.0 * self.sigma * self.sigma;
        let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / denom).exp()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// Default pyramid: 5x5 σ=1, 11x11 σ=2, 21x21 σ=4.
pub fn default_pyramid() -> Vec<GaussianKernel> {
    vec![GaussianKernel::new(5, 1.0), GaussianKernel::new(11, 2.0), GaussianKernel::new(21, 4.0)]
}

/// Sum of kernel radii: how far smoothing can spread a nonzero height.
pub fn total_radius(kernels: &[GaussianKernel]) -> usize {
    kernels.iter().map(GaussianKernel::radius).sum()
}

/// Applies each kernel in order (separably, replicate padding at the borders).
pub fn smooth_height_map(hm: &HeightMap, kernels: &[GaussianKernel]) -> Result<HeightMap> {
    for k in kernels {
        k.validate()?;
    }
    let (w, h) = hm.dims();
    let mut cur = hm.data().to_vec();
    let mut tmp = vec![0.0f32; w * h];
    for k in kernels {
        let taps: Vec<f32> = k.taps().into_iter().map(|v| v as f32).collect();
        convolve_rows(&cur, &mut tmp, w, h, &taps);
        convolve_cols(&tmp, &mut cur, w, h, &taps);
    }
    // convolution of non-negative data with non-negative taps is non-negative
    // up to rounding
    for v in &mut cur {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(HeightMap::from_vec_unchecked(w, h, hm.pitch(), cur))
}

fn convolve_rows(src: &[f32], dst: &mut [f32], w: usize, h: usize, taps: &[f32]) {
    let r = taps.len() / 2;
    let mut padded = vec![0.0f32; w + 2 * r];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        let out = &mut dst[row * w..(row + 1) * w];
        if line.iter().all(|v| *v == 0.0) {
            out.fill(0.0);
            continue;
        }
        padded[..r].fill(line[0]);
        padded[r..r + w].copy_from_slice(line);
        padded[r + w..].fill(line[w - 1]);
        for (x, o) in out.iter_mut().enumerate() {
            let window = &padded[x..x + taps.len()];
            *o = window.iter().zip(taps).map(|(a, b)| a * b).sum();
        }
    }
}

fn convolve_cols(src: &[f32], dst: &mut [f32], w: usize, h: usize, taps: &[f32]) {
    let r = taps.len() as isize / 2;
    dst.fill(0.0);
    for row in 0..h {
        let out = &mut dst[row * w..(row + 1) * w];
        for (t, &tap) in taps.iter().enumerate() {
            let src_row = (row as isize + t as isize - r).clamp(0, h as isize - 1) as usize;
            let line = &src[src_row * w..(src_row + 1) * w];
            for (o, v) in out.iter_mut().zip(line) {
                *o += tap * v;
            }
        }
    }
}
