//! Histogram of oriented space-time gradients.
//!
//! The gray video volume is cut into `cells_y × cells_x × cells_t` cells.
//! Every voxel's gradient `(∂x, ∂y, ∂t)` (central differences, replicated
//! borders) votes with its magnitude for the nearest of 20 directions, the
//! vertices of a regular dodecahedron. Per-cell histograms are
//! L1-normalised and concatenated in `t`, then `y`, then `x` order.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

/// Number of orientation bins.
pub const ORIENTATION_BINS: usize = 20;
/// Cells whose accumulated magnitude is below this emit all zeros.
pub const MASS_GUARD: f64 = 1e-12;

/// Unit vertices of a regular dodecahedron: `(±1, ±1, ±1)`,
/// `(0, ±1/φ, ±φ)`, `(±1/φ, ±φ, 0)`, `(±φ, 0, ±1/φ)`, scaled by `1/√3`.
pub fn orientation_table() -> &'static [[f64; 3]; ORIENTATION_BINS] {
    static TABLE: OnceLock<[[f64; 3]; ORIENTATION_BINS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let inv = 1.0 / phi;
        let mut v = Vec::with_capacity(ORIENTATION_BINS);
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    v.push([sx, sy, sz]);
                }
            }
        }
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                v.push([0.0, s1 * inv, s2 * phi]);
                v.push([s1 * inv, s2 * phi, 0.0]);
                v.push([s1 * phi, 0.0, s2 * inv]);
            }
        }
        let norm = 3f64.sqrt();
        let mut out = [[0.0; 3]; ORIENTATION_BINS];
        for (dst, src) in out.iter_mut().zip(v) {
            *dst = [src[0] / norm, src[1] / norm, src[2] / norm];
        }
        out
    })
}

/// Bin with the largest dot product against `g`; ties go to the lower bin.
pub fn orientation_bin(g: [f64; 3]) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, v) in orientation_table().iter().enumerate() {
        let dot = v[0] * g[0] + v[1] * g[1] + v[2] * g[2];
        if dot > best_dot {
            best_dot = dot;
            best = i;
        }
    }
    best
}

/// Splits `n` items into `parts` contiguous ranges; the first `n % parts`
/// ranges take one extra item.
pub fn temporal_segments(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|s| {
            let len = base + usize::from(s < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Cell of `pos` when `len` is split at `floor(c · len / parts)`.
fn spatial_cell(pos: usize, len: usize, parts: usize) -> usize {
    (0..parts).rev().find(|&c| c * len / parts <= pos).unwrap_or(0)
}

/// A gray video volume with intensities in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GrayVolume {
    pub height: usize,
    pub width: usize,
    /// One row-major plane per frame.
    pub frames: Vec<Vec<f64>>,
}

impl GrayVolume {
    fn at(&self, t: usize, y: usize, x: usize) -> f64 {
        self.frames[t][y * self.width + x]
    }

    /// Central-difference gradient `(∂x, ∂y, ∂t)` with replicated borders.
    pub fn gradient(&self, t: usize, y: usize, x: usize) -> [f64; 3] {
        let (h, w, n) = (self.height, self.width, self.frames.len());
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let (t0, t1) = (t.saturating_sub(1), (t + 1).min(n - 1));
        [
            (self.at(t, y, x1) - self.at(t, y, x0)) / 2.0,
            (self.at(t, y1, x) - self.at(t, y0, x)) / 2.0,
            (self.at(t1, y, x) - self.at(t0, y, x)) / 2.0,
        ]
    }
}

/// Cell layout of the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CellLayout {
    pub cells_y: usize,
    pub cells_x: usize,
    pub cells_t: usize,
}

impl CellLayout {
    pub fn dim(&self) -> usize {
        self.cells_y * self.cells_x * self.cells_t * ORIENTATION_BINS
    }
}

pub fn spacetime_histogram(volume: &GrayVolume, layout: CellLayout) -> Result<Vec<f64>> {
    let n = volume.frames.len();
    if n < 2 {
        return Err(invalid!("space-time descriptor needs at least 2 frames, got {n}"));
    }
    let (h, w) = (volume.height, volume.width);
    if h < layout.cells_y || w < layout.cells_x {
        return Err(invalid!("{h}x{w} frames are too small for the cell layout"));
    }
    if volume.frames.iter().any(|f| f.len() != h * w) {
        return Err(invalid!("all frames must be {h}x{w}"));
    }
    let spatial = layout.cells_y * layout.cells_x;
    let mut hist = vec![0.0; layout.dim()];
    let ys: Vec<usize> = (0..h).map(|y| spatial_cell(y, h, layout.cells_y)).collect();
    let xs: Vec<usize> = (0..w).map(|x| spatial_cell(x, w, layout.cells_x)).collect();
    for (seg, frames) in temporal_segments(n, layout.cells_t).into_iter().enumerate() {
        for t in frames {
            for y in 0..h {
                for x in 0..w {
                    let g = volume.gradient(t, y, x);
                    let mag = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let cell = seg * spatial + ys[y] * layout.cells_x + xs[x];
                    hist[cell * ORIENTATION_BINS + orientation_bin(g)] += mag;
                }
            }
        }
    }
    for block in hist.chunks_mut(ORIENTATION_BINS) {
        l1_normalize_guarded(block);
    }
    Ok(hist)
}

/// Scales `block` to unit L1 mass, or zeroes it when the mass is below
/// [`MASS_GUARD`].
pub fn l1_normalize_guarded(block: &mut [f64]) {
    let mass: f64 = block.iter().map(|v| v.abs()).sum();
    if mass < MASS_GUARD {
        block.iter_mut().for_each(|v| *v = 0.0);
    } else {
        block.iter_mut().for_each(|v| *v /= mass);
    }
}
