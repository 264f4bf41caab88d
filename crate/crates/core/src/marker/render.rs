//! Marker stamping and flow visualisation.

use super::field::MarkerStyle;
use super::motion::Vec2;
use crate::error::{Error, Result};
use crate::raster::TactileImage;

const SUBSAMPLES: usize = 8;

/// Fraction of pixel `(col, row)` covered by a disc at `(cx, cy)` (pixel units).
pub fn disc_coverage(col: usize, row: usize, cx: f64, cy: f64, radius: f64) -> f64 {
    let r2 = radius * radius;
    let step = 1.0 / SUBSAMPLES as f64;
    let mut hits = 0usize;
    for j in 0..SUBSAMPLES {
        let y = row as f64 - 0.5 + (j as f64 + 0.5) * step - cy;
        for i in 0..SUBSAMPLES {
            let x = col as f64 - 0.5 + (i as f64 + 0.5) * step - cx;
            if x * x + y * y <= r2 {
                hits += 1;
            }
        }
    }
    hits as f64 / (SUBSAMPLES * SUBSAMPLES) as f64
}

/// Per-pixel coverage (max over markers) for every touched pixel.
pub fn marker_coverage(dims: (usize, usize), positions: &[Vec2], pitch: f64, radius_px: f64) -> Vec<(usize, f32)> {
    let (w, h) = dims;
    let mut cover = std::collections::HashMap::<usize, f32>::new();
    for &(x, y) in positions {
        let (cx, cy) = (x / pitch, y / pitch);
        let c0 = (cx - radius_px - 1.0).floor().max(0.0) as usize;
        let r0 = (cy - radius_px - 1.0).floor().max(0.0) as usize;
        let c1 = ((cx + radius_px + 1.0).ceil() as i64).min(w as i64 - 1);
        let r1 = ((cy + radius_px + 1.0).ceil() as i64).min(h as i64 - 1);
        if c1 < 0 || r1 < 0 {
            continue;
        }
        for row in r0..=r1 as usize {
            for col in c0..=c1 as usize {
                let k = disc_coverage(col, row, cx, cy, radius_px) as f32;
                if k > 0.0 {
                    let e = cover.entry(row * w + col).or_insert(0.0);
                    *e = e.max(k);
                }
            }
        }
    }
    let mut out: Vec<(usize, f32)> = cover.into_iter().collect();
    out.sort_unstable_by_key(|(i, _)| *i);
    out
}

/// Stamps anti-aliased dark discs at `positions` (mm).
pub fn render_markers(img: &TactileImage, positions: &[Vec2], style: &MarkerStyle, pitch: f64) -> Result<TactileImage> {
    style.validate()?;
    let mut out = img.clone();
    let data = out.data_mut();
    for (i, k) in marker_coverage(img.dims(), positions, pitch, style.radius_px) {
        let f = 1.0 - style.darkness as f32 * k;
        for c in 0..3 {
            data[3 * i + c] = (data[3 * i + c] as f32 * f).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Arrow from a marker's rest position along its scaled displacement (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrow {
    pub tail: Vec2,
    pub head: Vec2,
}

impl Arrow {
    pub fn length(&self) -> f64 {
        (self.head.0 - self.tail.0).hypot(self.head.1 - self.tail.1)
    }
}

pub fn flow_arrows(initial: &[Vec2], current: &[Vec2], scale: f64) -> Result<Vec<Arrow>> {
    if initial.len() != current.len() {
        return Err(Error::LengthMismatch { left: initial.len(), right: current.len() });
    }
    Ok(initial
        .iter()
        .zip(current)
        .map(|(a, b)| Arrow { tail: *a, head: (a.0 + scale * (b.0 - a.0), a.1 + scale * (b.1 - a.1)) })
        .collect())
}

const FLOW_BACKGROUND: [u8; 3] = [128, 128, 128];
const FLOW_DOT: [u8; 3] = [30, 30, 30];
const FLOW_ARROW: [u8; 3] = [240, 240, 240];

/// Arrows drawn on a neutral background; markers that did not move appear
/// as dots only.
pub fn flow_image(
    initial: &[Vec2],
    current: &[Vec2],
    scale: f64,
    dims: (usize, usize),
    pitch: f64,
) -> Result<TactileImage> {
    let arrows = flow_arrows(initial, current, scale)?;
    let mut img = TactileImage::filled(dims.0, dims.1, FLOW_BACKGROUND);
    for a in &arrows {
        let tail = (a.tail.0 / pitch, a.tail.1 / pitch);
        let head = (a.head.0 / pitch, a.head.1 / pitch);
        let len = (head.0 - tail.0).hypot(head.1 - tail.1);
        if len >= 0.5 {
            draw_line(&mut img, tail, head, FLOW_ARROW);
            let barb = (0.3 * len).clamp(1.0, 6.0);
            let back = ((tail.0 - head.0) / len, (tail.1 - head.1) / len);
            for sign in [-1.0, 1.0] {
                let (s, c) = (sign * 25f64.to_radians()).sin_cos();
                let d = (back.0 * c - back.1 * s, back.0 * s + back.1 * c);
                draw_line(&mut img, head, (head.0 + barb * d.0, head.1 + barb * d.1), FLOW_ARROW);
            }
        }
    }
    for a in &arrows {
        let (c, r) = ((a.tail.0 / pitch).round(), (a.tail.1 / pitch).round());
        for (dc, dr) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            plot(&mut img, c + dc as f64, r + dr as f64, FLOW_DOT);
        }
    }
    Ok(img)
}

fn plot(img: &mut TactileImage, c: f64, r: f64, rgb: [u8; 3]) {
    if c >= 0.0 && r >= 0.0 && (c as usize) < img.width() && (r as usize) < img.height() {
        img.set_pixel(c as usize, r as usize, rgb);
    }
}

fn draw_line(img: &mut TactileImage, from: Vec2, to: Vec2, rgb: [u8; 3]) {
    let steps = (to.0 - from.0).abs().max((to.1 - from.1).abs()).ceil().max(1.0) as usize;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        plot(img, (from.0 + t * (to.0 - from.0)).round(), (from.1 + t * (to.1 - from.1)).round(), rgb);
    }
}
