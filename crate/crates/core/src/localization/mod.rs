//! Vitushkin localization `V_φ(f) = Φ * (φ 𝓛f)`, δ-partitions of unity,
//! localized pieces `f_j = Φ * (ψ_j 𝓛f)`, their Laurent coefficients and
//! far-field decay.

mod convolve;
mod laurent;
mod partition;

use rayon::prelude::*;

pub use convolve::{next_fast_len, singular_cell_average, Convolver, SourcePatch, SINGULAR_SUBCELLS};
pub use laurent::{
    farfield_decay_check, laurent_coeffs, loglog_fit, potential, potential_grad, AnnulusSpec, DecayReport,
    FarField, LaurentCoeffs, PointSource, RootCase, SlopeFit, DEFAULT_K4, DEFAULT_M_MAX,
};
pub use partition::{
    build_partition, mollifier, mollifier_patch, phi1, PartitionCell, PartitionOfUnity, PartitionStats,
    SmoothedBump,
};

use crate::elliptic::{EllipticOperator, Stencil};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::oscillation::Disc;
use crate::C64;

/// Relative size below which bump samples on or beyond the support circle
/// count as zero.
pub const LEAK_TOL: f64 = 1e-12;

/// Stencil used for `𝓛f` in the sources of localized functions.
pub const LOCALIZATION_STENCIL: Stencil = Stencil::Fourth;

/// `V_φ(f) = Φ * (φ·𝓛f)` on `f`'s grid, with `𝓛f` by fourth-order central
/// differences.
/// `phi` must share `f`'s grid and vanish outside `support`.
pub fn vitushkin_localize(op: &EllipticOperator, f: &GridFunction, phi: &GridFunction, support: &Disc) -> Result<GridFunction> {
    if !f.grid.same_shape(&phi.grid) {
        return Err(Error::GridMismatch);
    }
    let g = f.grid;
    let peak = phi.sup_norm();
    let r2 = support.radius * support.radius;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let v = phi.at(ix, iy).norm();
            if v > LEAK_TOL * peak && (g.point(ix, iy) - support.center).norm_sqr() >= r2 {
                return Err(Error::SupportLeak(v / peak));
            }
        }
    }
    let lf = op.apply_l_with(f, LOCALIZATION_STENCIL)?;
    let t: Vec<C64> = lf.values.iter().zip(&phi.values).map(|(a, b)| a * b).collect();
    let conv = Convolver::new(op, g)?;
    Ok(match SourcePatch::from_grid_values(&g, &t) {
        Some(src) => conv.apply_to_grid(&src),
        None => GridFunction::zeros(g),
    })
}

/// One cell of [`LocalizedPieces`].
#[derive(Debug, Clone)]
pub struct PieceCell {
    pub index: (i64, i64),
    pub center: C64,
    /// `ψ_j·𝓛f`; `None` when it vanishes identically (then `f_j = 0`).
    pub source: Option<SourcePatch>,
}

/// Localized pieces `f_j`, stored as their sources `ψ_j·𝓛f` and evaluated
/// on demand with a shared FFT convolver.
#[derive(Debug)]
pub struct LocalizedPieces {
    pub grid: GridSpec,
    pub delta: f64,
    pub cells: Vec<PieceCell>,
    convolver: Convolver,
}

/// Splits `f` into `f_j = Φ * (ψ_j 𝓛f)`. Fails with `CoverageGap` when
/// `𝓛f` is nonzero outside the region where `Σ ψ_j = 1`, or when `f` does
/// not vanish near the grid frame.
pub fn localized_pieces(op: &EllipticOperator, f: &GridFunction, partition: &PartitionOfUnity) -> Result<LocalizedPieces> {
    let g = f.grid;
    if !g.same_shape(&partition.grid) {
        return Err(Error::GridMismatch);
    }
    let fpeak = f.sup_norm();
    let frame = f.invalid_margin + LOCALIZATION_STENCIL.radius() + 1;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let edge = ix < frame || iy < frame || ix + frame >= g.nx || iy + frame >= g.ny;
            if edge && f.at(ix, iy).norm() > 1e-12 * fpeak {
                return Err(Error::CoverageGap(format!("f is nonzero near the grid frame at {}", g.point(ix, iy))));
            }
        }
    }
    let lf = op.apply_l_with(f, LOCALIZATION_STENCIL)?;
    let lpeak = lf.sup_norm();
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let x = g.point(ix, iy);
            if lf.at(ix, iy).norm() > 1e-14 * lpeak && !partition.psi_covers(x) {
                return Err(Error::CoverageGap(format!("Lf is nonzero at {x}, outside the covered region")));
            }
        }
    }
    let cells = partition
        .cells
        .par_iter()
        .map(|cell| {
            let psi = cell.psi();
            let (x0, y0) = (psi.ix0.max(0), psi.iy0.max(0));
            let x1 = (psi.ix0 + psi.w as i64).min(g.nx as i64);
            let y1 = (psi.iy0 + psi.h as i64).min(g.ny as i64);
            let source = if x1 <= x0 || y1 <= y0 {
                None
            } else {
                let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
                let mut values = Vec::with_capacity(w * h);
                let mut any = false;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        let v = lf.at(ix as usize, iy as usize) * psi.get(ix, iy);
                        any |= v != C64::new(0.0, 0.0);
                        values.push(v);
                    }
                }
                any.then_some(SourcePatch { ix0: x0, iy0: y0, w, h, values })
            };
            PieceCell { index: cell.index, center: cell.center, source }
        })
        .collect();
    Ok(LocalizedPieces { grid: g, delta: partition.delta, cells, convolver: Convolver::new(op, g)? })
}

impl LocalizedPieces {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&k| self.cells[k].source.is_some())
    }

    /// `f_j` on the grid.
    pub fn piece(&self, k: usize) -> GridFunction {
        match &self.cells[k].source {
            Some(src) => self.convolver.apply_to_grid(src),
            None => GridFunction::zeros(self.grid),
        }
    }

    /// Every piece, materialized.
    pub fn to_vec(&self) -> Vec<GridFunction> {
        (0..self.len()).map(|k| self.piece(k)).collect()
    }

    /// `Σ_j f_j`, evaluating each piece separately.
    pub fn reconstruct(&self) -> GridFunction {
        let mut acc = GridFunction::zeros(self.grid);
        for k in self.nonzero() {
            acc.add_assign(&self.piece(k)).expect("same grid");
        }
        acc
    }

    /// Point sources `ψ_j 𝓛f(x) h²` of piece `k`.
    pub fn point_sources(&self, k: usize) -> Vec<PointSource> {
        let h2 = self.grid.spacing * self.grid.spacing;
        match &self.cells[k].source {
            Some(src) => src
                .iter_on(&self.grid)
                .map(|(ix, iy, v)| PointSource { position: self.grid.point(ix, iy), weight: v * h2 })
                .collect(),
            None => Vec::new(),
        }
    }

    /// `∫ |ψ_j 𝓛f|`, the natural scale of `c₀` for piece `k`.
    pub fn source_l1(&self, k: usize) -> f64 {
        let h2 = self.grid.spacing * self.grid.spacing;
        self.cells[k].source.as_ref().map_or(0.0, |s| s.values.iter().map(|v| v.norm()).sum::<f64>() * h2)
    }

    /// Laurent coefficients of piece `k` about its cell center.
    pub fn laurent(&self, op: &EllipticOperator, k: usize, m_max: usize) -> LaurentCoeffs {
        laurent_coeffs(op, &self.point_sources(k), self.cells[k].center, m_max)
    }
}

/// `c₀ = ∫ f 𝓛ψ` integrated by parts: `−c11 ∫ ∂₁f ∂₂ψ` (distinct roots) or
/// `−c11 ∫ ∂₁f ∂₁ψ` (repeated root, where `𝓛 = c11 ∂₁²`), by the grid
/// sum over the samples of `ψ`.
pub fn c0_by_parts(op: &EllipticOperator, f: &GridFunction, psi: &SmoothedBump) -> Result<C64> {
    let (fx, fy) = f.gradients()?;
    let g = f.grid;
    let mut acc = C64::new(0.0, 0.0);
    for (ix, iy, _) in psi.values.iter_on(&g) {
        let (i, j) = (ix as i64, iy as i64);
        let k = g.index(ix, iy);
        let (df1, _) = op.char_derivatives(fx[k], fy[k]);
        let (dp1, dp2) = op.char_derivatives(C64::new(psi.dx.get(i, j), 0.0), C64::new(psi.dy.get(i, j), 0.0));
        acc += df1 * if op.repeated { dp1 } else { dp2 };
    }
    Ok(-op.c11 * acc * (g.spacing * g.spacing))
}
