//! Bilinear resampling of a square position-embedding grid.

use ndarray::{Array1, Array3};

use crate::error::{Error, Result};

/// Position embeddings: an optional class-token row plus an `S x S x D`
/// spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEmbedding {
    pub class: Option<Array1<f64>>,
    pub grid: Array3<f64>,
}

impl PositionEmbedding {
    pub fn side(&self) -> usize {
        self.grid.dim().0
    }

    pub fn dim(&self) -> usize {
        self.grid.dim().2
    }

    /// Resamples the spatial grid to `target x target`; the class row is
    /// passed through unchanged.
    pub fn interpolate(&self, target: usize) -> Result<Self> {
        Ok(Self {
            class: self.class.clone(),
            grid: interpolate_grid(&self.grid, target)?,
        })
    }
}

/// Interpolation between `a` and `b`, kept inside `[min(a,b), max(a,b)]`.
#[inline]
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if a == b {
        return a;
    }
    (a + w * (b - a)).clamp(a.min(b), a.max(b))
}

/// Source index pair and weight for output index `i` (half-pixel centres,
/// edges clamped).
fn source_coord(i: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let pos = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, pos - lo as f64)
}

/// Bilinear resampling of an `S x S x D` grid to `G x G x D`, channel by
/// channel. `G == S` returns an exact copy.
pub fn interpolate_grid(grid: &Array3<f64>, target: usize) -> Result<Array3<f64>> {
    let (rows, cols, dim) = grid.dim();
    if rows != cols {
        return Err(Error::invalid(format!(
            "position grid must be square, got {rows}x{cols}"
        )));
    }
    if rows == 0 || target == 0 {
        return Err(Error::invalid("grid sides must be at least 1"));
    }
    if target == rows {
        return Ok(grid.clone());
    }
    let coords: Vec<_> = (0..target).map(|i| source_coord(i, rows, target)).collect();
    let mut out = Array3::zeros((target, target, dim));
    for (y, &(y0, y1, wy)) in coords.iter().enumerate() {
        for (x, &(x0, x1, wx)) in coords.iter().enumerate() {
            for c in 0..dim {
                let top = lerp(grid[[y0, x0, c]], grid[[y0, x1, c]], wx);
                let bottom = lerp(grid[[y1, x0, c]], grid[[y1, x1, c]], wx);
                out[[y, x, c]] = lerp(top, bottom, wy);
            }
        }
    }
    Ok(out)
}
