//! Image similarity and marker displacement error.

use std::fmt;

use crate::error::{Error, Result};
use crate::marker::DisplacementField;
use crate::raster::{luma, TactileImage};

const PEAK: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

/// PSNR in dB, or `Infinite` for identical images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Self {
        if mse <= 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (PEAK * PEAK / mse).log10())
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Psnr::Finite(v) => Some(*v),
            Psnr::Infinite => None,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetricsReport {
    pub l1: f64,
    pub mse: f64,
    pub ssim: f64,
    pub psnr: Psnr,
    pub width: usize,
    pub height: usize,
}

impl ImageMetricsReport {
    pub fn to_text(&self) -> String {
        format!(
            "image metrics ({}x{})\n  L1   {:.4}\n  MSE  {:.4}\n  SSIM {:.6}\n  PSNR {} dB\n",
            self.width, self.height, self.l1, self.mse, self.ssim, self.psnr
        )
    }

    /// One `key=value` record per line.
    pub fn to_key_values(&self) -> String {
        format!(
            "width={}\nheight={}\nl1={}\nmse={}\nssim={}\npsnr={}\n",
            self.width,
            self.height,
            self.l1,
            self.mse,
            self.ssim,
            match self.psnr {
                Psnr::Finite(v) => v.to_string(),
                Psnr::Infinite => "inf".to_string(),
            }
        )
    }
}

pub fn image_metrics(a: &TactileImage, b: &TactileImage) -> Result<ImageMetricsReport> {
    a.ensure_dims(b.dims())?;
    let n = a.data().len() as f64;
    let (mut l1, mut sq) = (0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = *x as f64 - *y as f64;
        l1 += d.abs();
        sq += d * d;
    }
    let mse = sq / n;
    Ok(ImageMetricsReport {
        l1: l1 / n,
        mse,
        ssim: ssim(a, b)?,
        psnr: Psnr::from_mse(mse),
        width: a.width(),
        height: a.height(),
    })
}

fn window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> =
        (0..SSIM_WINDOW).map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filtering.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut tmp = vec![0.0; ow * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..ow {
            tmp[row * ow + col] = taps.iter().zip(&line[col..col + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for row in 0..oh {
        for col in 0..ow {
            out[row * ow + col] = taps.iter().enumerate().map(|(i, t)| t * tmp[(row + i) * ow + col]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 windows of the luma channel.
pub fn ssim(a: &TactileImage, b: &TactileImage) -> Result<f64> {
    a.ensure_dims(b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}")));
    }
    let la: Vec<f64> = a.data().chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
    let lb: Vec<f64> = b.data().chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let taps = window();
    let mu_a = filter_valid(&la, w, h, &taps);
    let mu_b = filter_valid(&lb, w, h, &taps);
    let e_aa = filter_valid(&aa, w, h, &taps);
    let e_bb = filter_valid(&bb, w, h, &taps);
    let e_ab = filter_valid(&ab, w, h, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * (ma * mb) + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    Ok(total / mu_a.len() as f64)
}

/// Mean over markers of the L1 norm of the displacement difference (mm).
pub fn marker_l1(pred: &DisplacementField, truth: &DisplacementField) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = pred.vectors.iter().zip(&truth.vectors).map(|(p, t)| (p.0 - t.0).abs() + (p.1 - t.1).abs()).sum();
    Ok(s / pred.len() as f64)
}
