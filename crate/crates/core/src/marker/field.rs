use crate::error::{Error, Result};
use crate::scene::SensorGeometry;

/// How markers are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerStyle {
    /// Disc radius in pixels.
    pub radius_px: f64,
    /// 0 leaves pixels untouched, 1 paints full black.
    pub darkness: f64,
}

impl Default for MarkerStyle {
    fn default() -> Self {
        Self { radius_px: 2.5, darkness: 0.85 }
    }
}

impl MarkerStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_px.is_finite() && self.radius_px > 0.0) {
            return Err(Error::invalid(format!("marker radius must be > 0 px, got {}", self.radius_px)));
        }
        if !(0.0..=1.0).contains(&self.darkness) {
            return Err(Error::invalid(format!("marker darkness must lie in [0, 1], got {}", self.darkness)));
        }
        Ok(())
    }
}

/// Marker arrangement in the gel plane (mm).
#[derive(Debug, Clone, PartialEq)]
pub enum MarkerLayout {
    /// Rectangular grid; row `r`, column `c` at `origin + (c, r) * spacing`.
    Grid {
        rows: usize,
        cols: usize,
        spacing: f64,
        origin: (f64, f64),
    },
    /// Like `Grid`, with odd rows shifted by half a spacing.
    Staggered {
        rows: usize,
        cols: usize,
        spacing: f64,
        origin: (f64, f64),
    },
    Explicit(Vec<(f64, f64)>),
}

impl MarkerLayout {
    /// 7 x 9 grid at 2 mm centred on the default sensor.
    pub fn digit_default() -> Self {
        MarkerLayout::Grid { rows: 7, cols: 9, spacing: 2.0, origin: (1.6, 1.2) }
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        match self {
            MarkerLayout::Grid { rows, cols, spacing, origin } => grid(*rows, *cols, *spacing, *origin, false),
            MarkerLayout::Staggered { rows, cols, spacing, origin } => grid(*rows, *cols, *spacing, *origin, true),
            MarkerLayout::Explicit(p) => p.clone(),
        }
    }
}

fn grid(rows: usize, cols: usize, spacing: f64, origin: (f64, f64), stagger: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let shift = if stagger && r % 2 == 1 { spacing / 2.0 } else { 0.0 };
        for c in 0..cols {
            out.push((origin.0 + c as f64 * spacing + shift, origin.1 + r as f64 * spacing));
        }
    }
    out
}

/// Initial marker positions `M_ini` within a sensor's active area.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerField {
    positions: Vec<(f64, f64)>,
    extent: (f64, f64),
    pub style: MarkerStyle,
}

impl MarkerField {
    pub fn new(positions: Vec<(f64, f64)>, extent: (f64, f64), style: MarkerStyle) -> Result<Self> {
        style.validate()?;
        for (i, &(x, y)) in positions.iter().enumerate() {
            if !(x.is_finite() && y.is_finite() && (0.0..=extent.0).contains(&x) && (0.0..=extent.1).contains(&y)) {
                return Err(Error::invalid(format!(
                    "marker {i} at ({x}, {y}) mm lies outside the active area {}x{} mm",
                    extent.0, extent.1
                )));
            }
        }
        let mut sorted = positions.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("marker positions must be pairwise distinct"));
        }
        Ok(Self { positions, extent, style })
    }

    pub fn from_layout(layout: &MarkerLayout, sensor: &SensorGeometry, style: MarkerStyle) -> Result<Self> {
        if let MarkerLayout::Grid { spacing, .. } | MarkerLayout::Staggered { spacing, .. } = layout {
            if !(spacing.is_finite() && *spacing > 0.0) {
                return Err(Error::invalid(format!("marker spacing must be > 0 mm, got {spacing}")));
            }
        }
        Self::new(layout.positions(), sensor.extent(), style)
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn extent(&self) -> (f64, f64) {
        self.extent
    }
}
