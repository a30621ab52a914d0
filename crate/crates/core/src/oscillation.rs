//! L-oscillation of a sampled function over a disc,
//!
//! `O_B(f) = (1/2πr) ∮_{∂B} f(x) L(x−a)/r² dℓ − (c11+c22)/(2πr²) ∬_B f dx`,
//!
//! its hat-weight form `∬_B ψ 𝓛f`, and the modulus of continuity of `∇f`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::C64;

pub const DEFAULT_N_BOUNDARY: usize = 256;
pub const DEFAULT_N_RADIAL: usize = 64;
/// Relative change tolerated when the boundary rule is doubled.
pub const RESOLUTION_TOL: f64 = 1e-3;
/// Disc dilation that must still fit inside the grid.
pub const DILATION: f64 = 1.05;
/// Anchor budget of the modulus-of-continuity estimator.
const MODULUS_ANCHORS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: C64,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("disc radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// `λB`: same center, radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Disc {
        Disc { center: self.center, radius: self.radius * factor }
    }

    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm_sqr() < self.radius * self.radius
    }
}

/// Hat weight `ψ(x) = (r² − |x−a|²)/(4πr²)` inside the disc, `0` outside.
#[inline]
pub fn psi_weight(b: &Disc, x: C64) -> f64 {
    let r2 = b.radius * b.radius;
    let d2 = (x - b.center).norm_sqr();
    if d2 >= r2 {
        0.0
    } else {
        (r2 - d2) / (4.0 * PI * r2)
    }
}

fn check_disc(f: &GridFunction, b: &Disc) -> Result<()> {
    let d = b.scaled(DILATION);
    let margin = if f.invalid_margin > 0 { f.invalid_margin + 1 } else { 0 };
    if !f.grid.contains_disc(d.center, d.radius, margin) {
        return Err(Error::DiscOutsideGrid { center: format!("{}", b.center), radius: b.radius });
    }
    Ok(())
}

/// L-oscillation by the trapezoid rule on `n_boundary` equispaced angles
/// and a midpoint polar rule with `n_radial × n_boundary` nodes.
///
/// The radial midpoint rule is taken in `ρ²` (equal-area rings), which
/// integrates quadratics exactly. Off-grid values use cubic convolution,
/// which reproduces quadratics; bilinear interpolation leaves an `O(h²)`
/// bias that aliases with the boundary rule.
pub fn l_oscillation(
    op: &EllipticOperator,
    f: &GridFunction,
    b: &Disc,
    n_boundary: usize,
    n_radial: usize,
) -> Result<C64> {
    if n_boundary < 64 {
        return Err(Error::InvalidParameter(format!("n_boundary = {n_boundary} < 64")));
    }
    if n_radial == 0 {
        return Err(Error::InvalidParameter("n_radial = 0".into()));
    }
    check_disc(f, b)?;
    let coarse = oscillation_terms(op, f, b, n_boundary, n_radial);
    let fine = oscillation_terms(op, f, b, 2 * n_boundary, n_radial);
    let value = coarse.0 - coarse.1;
    let refined = fine.0 - fine.1;
    // The two terms cancel exactly on 𝓛-analytic inputs, and each may
    // vanish by symmetry, so the change is measured against the boundary
    // mean of |f·L| as well.
    let scale = refined.norm().max(coarse.0.norm()).max(coarse.1.norm()).max(coarse.2);
    if scale > 0.0 {
        let rel = (value - refined).norm() / scale;
        if rel > RESOLUTION_TOL {
            return Err(Error::QuadratureUnderresolved(rel));
        }
    }
    Ok(value)
}

/// `(boundary term, area term, boundary mean of |f·L|)` of the L-oscillation.
fn oscillation_terms(op: &EllipticOperator, f: &GridFunction, b: &Disc, nb: usize, nr: usize) -> (C64, C64, f64) {
    let r = b.radius;
    let dtheta = 2.0 * PI / nb as f64;
    let eval = |z: C64| f.interpolate_cubic(z).expect("disc checked against grid");
    let samples: Vec<C64> = (0..nb)
        .map(|j| {
            let (s, c) = (j as f64 * dtheta).sin_cos();
            eval(b.center + C64::new(r * c, r * s)) * op.symbol(c, s)
        })
        .collect();
    let boundary = samples.iter().sum::<C64>() / nb as f64;
    let magnitude = samples.iter().map(|v| v.norm()).sum::<f64>() / nb as f64;
    let ring_area = r * r / (2.0 * nr as f64) * dtheta;
    let area: C64 = (0..nr)
        .into_par_iter()
        .map(|k| {
            let rho = r * ((k as f64 + 0.5) / nr as f64).sqrt();
            let ring: C64 = (0..nb)
                .map(|j| {
                    let (s, c) = ((j as f64 + 0.5) * dtheta).sin_cos();
                    eval(b.center + C64::new(rho * c, rho * s))
                })
                .sum();
            ring * ring_area
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    (boundary, area * op.trace() / (2.0 * PI * r * r), magnitude)
}

/// `∬_B ψ 𝓛f` by midpoint quadrature on the grid, with `𝓛f` from
/// [`EllipticOperator::apply_l`], weighted by cell averages of `ψ` (exact
/// inside the disc, 8×8 sub-samples on cells cut by `∂B`).
pub fn oscillation_via_psi(op: &EllipticOperator, f: &GridFunction, b: &Disc) -> Result<C64> {
    let lf = op.apply_l(f)?;
    check_disc(&lf, b)?;
    Ok(pair_with_psi(&lf, b))
}

pub(crate) fn pair_with_psi(lf: &GridFunction, b: &Disc) -> C64 {
    let g = lf.grid;
    let h = g.spacing;
    let (cx, cy) = g.to_lattice(b.center);
    let rr = b.radius / h + 1.0;
    let x0 = (cx - rr).floor().max(0.0) as usize;
    let x1 = ((cx + rr).ceil() as usize).min(g.nx - 1);
    let y0 = (cy - rr).floor().max(0.0) as usize;
    let y1 = ((cy + rr).ceil() as usize).min(g.ny - 1);
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    let sub = 8;
    // cell average of the quadratic ψ minus its center value: (h²/24)·Δψ
    let interior_shift = -h * h / (24.0 * PI * b.radius * b.radius);
    let rows: Vec<C64> = (y0..=y1)
        .into_par_iter()
        .map(|iy| {
            let mut acc = C64::new(0.0, 0.0);
            for ix in x0..=x1 {
                let x = g.point(ix, iy);
                let d = (x - b.center).norm();
                let w = if d < b.radius - half_diag {
                    psi_weight(b, x) + interior_shift
                } else if d > b.radius + half_diag {
                    continue;
                } else {
                    let mut s = 0.0;
                    for a in 0..sub {
                        for c in 0..sub {
                            let off = C64::new(
                                ((a as f64 + 0.5) / sub as f64 - 0.5) * h,
                                ((c as f64 + 0.5) / sub as f64 - 0.5) * h,
                            );
                            s += psi_weight(b, x + off);
                        }
                    }
                    s / (sub * sub) as f64
                };
                acc += lf.at(ix, iy) * w;
            }
            acc
        })
        .collect();
    rows.into_iter().sum::<C64>() * (h * h)
}

/// Modulus of continuity `ω(∇f, r)`: the largest `|∇f(x) − ∇f(y)|` over
/// sample pairs with `|x − y| ≤ r`.
///
/// Pairs are every lattice offset within `r` taken from a fixed anchor
/// lattice (all samples on grids up to 2¹⁶ points, a regular sub-lattice
/// beyond), so the estimate is monotone in `r`.
pub fn modulus_of_continuity(f: &GridFunction, r: f64) -> Result<f64> {
    let (g1, g2) = f.gradients()?;
    let g = f.grid;
    let stride = ((g.len() as f64 / MODULUS_ANCHORS as f64).sqrt().ceil() as usize).max(1);
    let reach = (r / g.spacing).floor() as i64;
    let r2 = (r / g.spacing) * (r / g.spacing);
    let mut offsets = Vec::new();
    for dx in 0..=reach {
        for dy in -reach..=reach {
            if (dx == 0 && dy <= 0) || ((dx * dx + dy * dy) as f64) > r2 * (1.0 + 1e-12) {
                continue;
            }
            offsets.push((dx, dy));
        }
    }
    let (nx, ny) = (g.nx as i64, g.ny as i64);
    let best = offsets
        .par_iter()
        .map(|&(dx, dy)| {
            let mut best = 0.0f64;
            let mut ay = 0;
            while ay < ny {
                let by = ay + dy;
                if by >= 0 && by < ny {
                    let mut ax = 0;
                    while ax + dx < nx {
                        let ka = (ay * nx + ax) as usize;
                        let kb = (by * nx + ax + dx) as usize;
                        let d = (g1[ka] - g1[kb]).norm_sqr() + (g2[ka] - g2[kb]).norm_sqr();
                        best = best.max(d);
                        ax += stride as i64;
                    }
                }
                ay += stride as i64;
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best.sqrt())
}
