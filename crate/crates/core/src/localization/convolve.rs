//! Discrete convolution with the fundamental solution on a grid,
//! `u(x_i) = h² Σ_p Φ(x_i − x_p) T(x_p)`, by zero-padded FFT.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::elliptic::EllipticOperator;
use crate::error::Result;
use crate::grid::{GridFunction, GridSpec};
use crate::C64;

/// Sub-cells per axis used to average `Φ` over the singular cell.
pub const SINGULAR_SUBCELLS: usize = 4;

/// Complex samples on a window of a host grid, indexed by host lattice
/// coordinates `(ix0 + i, iy0 + j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePatch {
    pub ix0: i64,
    pub iy0: i64,
    pub w: usize,
    pub h: usize,
    pub values: Vec<C64>,
}

impl SourcePatch {
    /// Smallest window holding every nonzero sample of `values` (row-major
    /// on `grid`); `None` when all samples vanish.
    pub fn from_grid_values(grid: &GridSpec, values: &[C64]) -> Option<Self> {
        let zero = C64::new(0.0, 0.0);
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                if values[grid.index(ix, iy)] != zero {
                    x0 = x0.min(ix);
                    x1 = x1.max(ix);
                    y0 = y0.min(iy);
                    y1 = y1.max(iy);
                }
            }
        }
        if x0 == usize::MAX {
            return None;
        }
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut out = Vec::with_capacity(w * h);
        for iy in y0..=y1 {
            out.extend_from_slice(&values[grid.index(x0, iy)..=grid.index(x1, iy)]);
        }
        Some(SourcePatch { ix0: x0 as i64, iy0: y0 as i64, w, h, values: out })
    }

    /// Iterates over `(ix, iy, value)` for nonzero in-frame samples.
    pub fn iter_on<'a>(&'a self, grid: &'a GridSpec) -> impl Iterator<Item = (usize, usize, C64)> + 'a {
        (0..self.h).flat_map(move |j| {
            (0..self.w).filter_map(move |i| {
                let ix = self.ix0 + i as i64;
                let iy = self.iy0 + j as i64;
                let v = self.values[j * self.w + i];
                let inside = ix >= 0 && iy >= 0 && ix < grid.nx as i64 && iy < grid.ny as i64;
                (inside && v != C64::new(0.0, 0.0)).then_some((ix as usize, iy as usize, v))
            })
        })
    }
}

/// Smallest `n' ≥ n` whose prime factors are all in {2, 3, 5, 7}.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Precomputed spectrum of `h²Φ` on a padded periodic grid.
pub struct Convolver {
    grid: GridSpec,
    px: usize,
    py: usize,
    /// Spectrum in transposed layout: `px` rows of length `py`.
    kernel_hat: Vec<C64>,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("grid", &self.grid).field("px", &self.px).field("py", &self.py).finish()
    }
}

impl Convolver {
    pub fn new(op: &EllipticOperator, grid: GridSpec) -> Result<Self> {
        let (nx, ny) = (grid.nx, grid.ny);
        let px = next_fast_len(2 * nx - 1);
        let py = next_fast_len(2 * ny - 1);
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_x = planner.plan_fft_inverse(px);
        let inv_y = planner.plan_fft_inverse(py);
        let h = grid.spacing;
        let singular = singular_cell_average(op, h);
        let mut buf = vec![C64::new(0.0, 0.0); px * py];
        buf.par_chunks_mut(px).enumerate().for_each(|(ry, row)| {
            let dy = if ry < ny { ry as i64 } else if ry + ny > py { ry as i64 - py as i64 } else { return };
            for (rx, slot) in row.iter_mut().enumerate() {
                let dx = if rx < nx { rx as i64 } else if rx + nx > px { rx as i64 - px as i64 } else { continue };
                let k = if dx == 0 && dy == 0 {
                    singular
                } else {
                    op.phi(C64::new(dx as f64 * h, dy as f64 * h)).expect("nonzero offset")
                };
                *slot = k * (h * h);
            }
        });
        let mut conv = Convolver { grid, px, py, kernel_hat: Vec::new(), fwd_x, fwd_y, inv_x, inv_y };
        conv.kernel_hat = conv.forward(buf, 0, py);
        Ok(conv)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// 2-D forward transform of a `py × px` buffer whose nonzero rows lie in
    /// `[row0, row1)`; returns the transposed spectrum.
    fn forward(&self, mut buf: Vec<C64>, row0: usize, row1: usize) -> Vec<C64> {
        let (px, py) = (self.px, self.py);
        fft_rows(&self.fwd_x, &mut buf[row0 * px..row1 * px], px);
        let mut t = transpose(&buf, py, px);
        drop(buf);
        fft_rows(&self.fwd_y, &mut t, py);
        t
    }

    /// `h² Σ_p Φ(x_i − x_p) T_p` on every node of the grid.
    pub fn apply(&self, src: &SourcePatch) -> Vec<C64> {
        let (nx, ny, px, py) = (self.grid.nx, self.grid.ny, self.px, self.py);
        let mut buf = vec![C64::new(0.0, 0.0); px * py];
        let (mut row0, mut row1) = (usize::MAX, 0);
        for (ix, iy, v) in src.iter_on(&self.grid) {
            buf[iy * px + ix] = v;
            row0 = row0.min(iy);
            row1 = row1.max(iy + 1);
        }
        if row0 == usize::MAX {
            return vec![C64::new(0.0, 0.0); nx * ny];
        }
        let mut spec = self.forward(buf, row0, row1);
        spec.par_iter_mut().zip(self.kernel_hat.par_iter()).for_each(|(a, k)| *a *= k);
        fft_rows(&self.inv_y, &mut spec, py);
        // back to row-major, keeping only the first ny rows
        let mut rows = vec![C64::new(0.0, 0.0); ny * px];
        rows.par_chunks_mut(px).enumerate().for_each(|(iy, row)| {
            for (ix, slot) in row.iter_mut().enumerate() {
                *slot = spec[ix * py + iy];
            }
        });
        drop(spec);
        fft_rows(&self.inv_x, &mut rows, px);
        let scale = 1.0 / (px * py) as f64;
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            out.extend(rows[iy * px..iy * px + nx].iter().map(|v| v * scale));
        }
        out
    }

    pub fn apply_to_grid(&self, src: &SourcePatch) -> GridFunction {
        GridFunction::new(self.grid, self.apply(src)).expect("grid-sized output")
    }
}

/// Mean of `Φ` over the `SINGULAR_SUBCELLS²` sub-cell centers of the cell
/// `[−h/2, h/2]²`.
pub fn singular_cell_average(op: &EllipticOperator, h: f64) -> C64 {
    let n = SINGULAR_SUBCELLS;
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let x = ((a as f64 + 0.5) / n as f64 - 0.5) * h;
            let y = ((b as f64 + 0.5) / n as f64 - 0.5) * h;
            acc += op.phi(C64::new(x, y)).expect("sub-cell centers avoid 0");
        }
    }
    acc / (n * n) as f64
}

fn fft_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [C64], len: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(len).for_each_init(
        || vec![C64::new(0.0, 0.0); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Transposes a `rows × cols` row-major matrix.
fn transpose(a: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    const B: usize = 32;
    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    out.par_chunks_mut(cols.min(B) * rows).enumerate().for_each(|(blk, chunk)| {
        let c0 = blk * B;
        let c1 = (c0 + B).min(cols);
        for r0 in (0..rows).step_by(B) {
            for c in c0..c1 {
                for r in r0..(r0 + B).min(rows) {
                    chunk[(c - c0) * rows + r] = a[r * cols + c];
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(769), 784);
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(11), 12);
        assert_eq!(next_fast_len(385), 392);
    }

    #[test]
    fn transpose_round_trip() {
        let a: Vec<C64> = (0..7 * 45).map(|k| c(k as f64, -(k as f64))).collect();
        let t = transpose(&a, 7, 45);
        assert_eq!(t[3 * 7 + 5], a[5 * 45 + 3]);
        assert_eq!(transpose(&t, 45, 7), a);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let op = EllipticOperator::new(c(1.0, 0.0), c(0.3, 0.2), c(2.0, -0.1)).unwrap();
        let grid = GridSpec::new(c(-0.3, -0.2), 0.05, 13, 9).unwrap();
        let conv = Convolver::new(&op, grid).unwrap();
        let src = SourcePatch {
            ix0: 3,
            iy0: 2,
            w: 3,
            h: 2,
            values: vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0), c(0.0, 0.0), c(4.0, -1.0)],
        };
        let got = conv.apply(&src);
        let h = grid.spacing;
        let sing = singular_cell_average(&op, h);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let mut want = c(0.0, 0.0);
                for (sx, sy, v) in src.iter_on(&grid) {
                    let d = grid.point(ix, iy) - grid.point(sx, sy);
                    let k = if ix == sx && iy == sy { sing } else { op.phi(d).unwrap() };
                    want += k * v * (h * h);
                }
                assert!((got[grid.index(ix, iy)] - want).norm() < 1e-13, "{ix} {iy}");
            }
        }
    }

    #[test]
    fn source_window_is_tight() {
        let grid = GridSpec::new(c(0.0, 0.0), 1.0, 5, 4).unwrap();
        let mut v = vec![c(0.0, 0.0); 20];
        v[grid.index(1, 2)] = c(1.0, 0.0);
        v[grid.index(3, 1)] = c(2.0, 0.0);
        let p = SourcePatch::from_grid_values(&grid, &v).unwrap();
        assert_eq!((p.ix0, p.iy0, p.w, p.h), (1, 1, 3, 2));
        assert!(SourcePatch::from_grid_values(&grid, &vec![c(0.0, 0.0); 20]).is_none());
    }
}
