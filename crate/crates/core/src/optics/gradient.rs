use crate::error::{Error, Result};
use crate::raster::HeightMap;

/// Per-pixel surface slope `(∂H/∂x, ∂H/∂y)`, dimensionless (mm per mm).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGradientMap {
    width: usize,
    height: usize,
    gx: Vec<f32>,
    gy: Vec<f32>,
}

impl SurfaceGradientMap {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> (f32, f32) {
        let i = row * self.width + col;
        (self.gx[i], self.gy[i])
    }

    pub fn gx(&self) -> &[f32] {
        &self.gx
    }

    pub fn gy(&self) -> &[f32] {
        &self.gy
    }

    /// Unit surface normal `(-gx, -gy, 1) / ‖·‖` at a pixel.
    pub fn normal(&self, col: usize, row: usize) -> [f64; 3] {
        let (gx, gy) = self.get(col, row);
        let (gx, gy) = (gx as f64, gy as f64);
        let n = (gx * gx + gy * gy + 1.0).sqrt();
        [-gx / n, -gy / n, 1.0 / n]
    }
}

/// Central differences inside, one-sided differences on the border rows and
/// columns; slopes are divided by the pixel pitch.
pub fn gradients(hm: &HeightMap) -> Result<SurfaceGradientMap> {
    let (w, h) = hm.dims();
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("gradient needs at least 3x3 pixels, got {w}x{h}")));
    }
    let d = hm.data();
    let inv2 = (0.5 / hm.pitch()) as f32;
    let inv1 = (1.0 / hm.pitch()) as f32;
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for row in 0..h {
        let base = row * w;
        let line = &d[base..base + w];
        let out = &mut gx[base..base + w];
        out[0] = (line[1] - line[0]) * inv1;
        out[w - 1] = (line[w - 1] - line[w - 2]) * inv1;
        for x in 1..w - 1 {
            out[x] = (line[x + 1] - line[x - 1]) * inv2;
        }
    }
    for row in 0..h {
        let (above, below, scale) = match row {
            0 => (0, 1, inv1),
            r if r == h - 1 => (h - 2, h - 1, inv1),
            r => (r - 1, r + 1, inv2),
        };
        for x in 0..w {
            gy[row * w + x] = (d[below * w + x] - d[above * w + x]) * scale;
        }
    }
    Ok(SurfaceGradientMap { width: w, height: h, gx, gy })
}
