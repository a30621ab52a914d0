//! Second-order elliptic operators with constant complex coefficients,
//!
//! `𝓛 = c11 ∂²/∂x₁² + 2 c12 ∂²/∂x₁∂x₂ + c22 ∂²/∂x₂²`,
//!
//! together with their characteristic roots, canonical coordinates
//! `(z₁, z₂)`, fundamental solution `Φ` and first-order kernels.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::C64;

const ROOT_REAL_TOL: f64 = 1e-12;
const REPEATED_TOL: f64 = 1e-9;
const CALIBRATION_AGREEMENT: f64 = 1e-4;
const ANGLE_SAMPLES: usize = 4096;

/// Canonical coordinates of a point, `z_s = Λ_s(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCoords {
    pub z1: C64,
    pub z2: C64,
}

/// Continuous argument of one canonical coordinate on the unit circle,
/// written as `±θ + arg(lead) + Arg(1 + ratio·e^{∓2iθ})` with `|ratio| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ArgPiece {
    winding: i32,
    lead_arg: f64,
    ratio: C64,
}

impl ArgPiece {
    fn new(p: C64, q: C64) -> Self {
        // z_s = p x₁ + q x₂ = α z + β z̄
        let i = C64::i();
        let alpha = (p - i * q) * 0.5;
        let beta = (p + i * q) * 0.5;
        if alpha.norm() > beta.norm() {
            ArgPiece { winding: 1, lead_arg: alpha.arg(), ratio: beta / alpha }
        } else {
            ArgPiece { winding: -1, lead_arg: beta.arg(), ratio: alpha / beta }
        }
    }

    /// Argument with the `±θ` term removed.
    #[inline]
    fn reduced_arg(&self, unit_conj_ratio: C64) -> f64 {
        // unit_conj_ratio = z̄/z = e^{-2iθ}
        let phase = if self.winding == 1 { unit_conj_ratio } else { unit_conj_ratio.conj() };
        self.lead_arg + (C64::new(1.0, 0.0) + self.ratio * phase).arg()
    }
}

/// A planar constant-coefficient elliptic operator and its characteristic data.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticOperator {
    pub c11: C64,
    pub c12: C64,
    pub c22: C64,
    pub lambda1: C64,
    pub lambda2: C64,
    pub repeated: bool,
    pub nu: i32,
    pub k1: C64,
    /// `z_s = p_s x₁ + q_s x₂`, stored as `[[p₁, q₁], [p₂, q₂]]`.
    coord: [[C64; 2]; 2],
    args: [ArgPiece; 2],
    arg_shift: f64,
}

impl EllipticOperator {
    /// Builds the operator, computes its roots and calibrates `k₁`.
    pub fn new(c11: C64, c12: C64, c22: C64) -> Result<Self> {
        if ![c11, c12, c22].iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if c11 == C64::new(0.0, 0.0) && c12 == C64::new(0.0, 0.0) && c22 == C64::new(0.0, 0.0) {
            return Err(Error::DegenerateOperator);
        }
        if c11.norm() <= ROOT_REAL_TOL * (c12.norm() + c22.norm()) {
            // L(1, 0) = c11 = 0: the characteristic equation loses a root to infinity,
            // i.e. the direction (1, 0) is characteristic.
            return Err(Error::NotElliptic("infinity (c11 = 0)".into()));
        }
        let (mut l1, mut l2) = quadratic_roots(c11, c12 * 2.0, c22);
        for l in [l1, l2] {
            if l.im.abs() <= ROOT_REAL_TOL * (1.0 + l.norm()) {
                return Err(Error::NotElliptic(format!("{l}")));
            }
        }
        // Descending (Im, Re), so that the Laplacian gets λ₁ = i, λ₂ = -i.
        if (l2.im, l2.re) > (l1.im, l1.re) {
            std::mem::swap(&mut l1, &mut l2);
        }
        let repeated = (l1 - l2).norm() <= REPEATED_TOL * (1.0 + l1.norm());
        if repeated {
            let m = (l1 + l2) * 0.5;
            l1 = m;
            l2 = m;
        }
        let nu = if repeated || l1.im.signum() == l2.im.signum() { -1 } else { 1 };
        let one = C64::new(1.0, 0.0);
        let coord = if repeated {
            [[one * 0.5, -one / l1 * 0.5], [one * 0.5, one / l1 * 0.5]]
        } else {
            [[l2 / (l2 - l1), one / (l2 - l1)], [l1 / (l1 - l2), one / (l1 - l2)]]
        };
        let args = [ArgPiece::new(coord[0][0], coord[0][1]), ArgPiece::new(coord[1][0], coord[1][1])];
        if !repeated {
            debug_assert_eq!(args[0].winding + nu * args[1].winding, 0);
        }
        let mut op = EllipticOperator {
            c11,
            c12,
            c22,
            lambda1: l1,
            lambda2: l2,
            repeated,
            nu,
            k1: one,
            coord,
            args,
            arg_shift: 0.0,
        };
        if !repeated {
            // Anchor the branch on the positive real axis: Θ(1) = Arg(z₁ z₂^ν)(1).
            let c = op.coords(one);
            let principal = (c.z1 * c.z2.powi(nu)).arg();
            let raw = op.raw_log_arg(one);
            op.arg_shift = ((principal - raw) / (2.0 * PI)).round() * 2.0 * PI;
        }
        op.k1 = op.calibrate_k1()?;
        Ok(op)
    }

    pub fn laplacian() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)).expect("Laplacian")
    }

    /// `∂²/∂z̄² = (∂₁² + 2i ∂₁∂₂ − ∂₂²) / 4`.
    pub fn bitsadze() -> Self {
        Self::new(C64::new(0.25, 0.0), C64::new(0.0, 0.25), C64::new(-0.25, 0.0)).expect("Bitsadze")
    }

    pub fn coefficients(&self) -> [C64; 3] {
        [self.c11, self.c12, self.c22]
    }

    /// Symbol `L(x) = c11 x₁² + 2 c12 x₁x₂ + c22 x₂²`.
    #[inline]
    pub fn symbol(&self, x1: f64, x2: f64) -> C64 {
        self.c11 * (x1 * x1) + self.c12 * (2.0 * x1 * x2) + self.c22 * (x2 * x2)
    }

    /// `c11 + c22`, the weight of the area term of the L-oscillation.
    pub fn trace(&self) -> C64 {
        self.c11 + self.c22
    }

    /// `|c11 λ² + 2 c12 λ + c22|` for both roots.
    pub fn root_residuals(&self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
            .map(|l| (self.c11 * l * l + self.c12 * l * 2.0 + self.c22).norm())
    }

    #[inline]
    pub fn coords(&self, z: C64) -> CanonicalCoords {
        let [[p1, q1], [p2, q2]] = self.coord;
        CanonicalCoords { z1: p1 * z.re + q1 * z.im, z2: p2 * z.re + q2 * z.im }
    }

    /// Real 2×2 matrix of the map `x ↦ z_s`, `s ∈ {1, 2}`, acting on `(x₁, x₂)`.
    pub fn coord_matrix(&self, s: usize) -> [[f64; 2]; 2] {
        let [p, q] = self.coord[s - 1];
        [[p.re, q.re], [p.im, q.im]]
    }

    /// Characteristic derivatives `(∂₁u, ∂₂u)` from the Cartesian partials.
    #[inline]
    pub fn char_derivatives(&self, d1: C64, d2: C64) -> (C64, C64) {
        if self.repeated {
            (d1 - self.lambda1 * d2, d1 + self.lambda1 * d2)
        } else {
            (d1 - self.lambda1 * d2, d1 - self.lambda2 * d2)
        }
    }

    fn raw_log_arg(&self, z: C64) -> f64 {
        let u = z.conj() / z;
        self.args[0].reduced_arg(u) + self.nu as f64 * self.args[1].reduced_arg(u)
    }

    /// Kernel of the fundamental solution without the factor `k₁`:
    /// `log(z₁ z₂^ν)` on the fixed branch, or `z₁/z₂` for a repeated root.
    pub fn phi_unnormalized(&self, z: C64) -> Result<C64> {
        if z.norm_sqr() == 0.0 {
            return Err(Error::SingularPoint);
        }
        let c = self.coords(z);
        if self.repeated {
            return Ok(c.z1 / c.z2);
        }
        let re = c.z1.norm().ln() + self.nu as f64 * c.z2.norm().ln();
        Ok(C64::new(re, self.raw_log_arg(z) + self.arg_shift))
    }

    /// Fundamental solution `Φ_𝓛(z)`.
    pub fn phi(&self, z: C64) -> Result<C64> {
        Ok(self.k1 * self.phi_unnormalized(z)?)
    }

    /// `(∂₁Φ, ∂₂Φ)` in characteristic derivatives.
    pub fn grad_phi(&self, z: C64) -> Result<(C64, C64)> {
        if z.norm_sqr() == 0.0 {
            return Err(Error::SingularPoint);
        }
        Ok(self.grad_phi_unchecked(z))
    }

    #[inline]
    pub(crate) fn grad_phi_unchecked(&self, z: C64) -> (C64, C64) {
        let c = self.coords(z);
        if self.repeated {
            (self.k1 / c.z2, -self.k1 * c.z1 / (c.z2 * c.z2))
        } else {
            (self.k1 / c.z1, self.k1 * self.nu as f64 / c.z2)
        }
    }

    /// The kernels `(K₁, K₂)`: `(1/z₁, 1/z₂)`, or `(z₁/z₂², 1/z₂)` for a repeated root.
    pub fn kernels(&self, z: C64) -> Result<(C64, C64)> {
        if z.norm_sqr() == 0.0 {
            return Err(Error::SingularPoint);
        }
        let c = self.coords(z);
        if self.repeated {
            Ok((c.z1 / (c.z2 * c.z2), C64::new(1.0, 0.0) / c.z2))
        } else {
            Ok((C64::new(1.0, 0.0) / c.z1, C64::new(1.0, 0.0) / c.z2))
        }
    }

    /// Measured constant `A` with `|∇ᶜΦ(z)| ≤ A/|z|`; the bound is
    /// homogeneous so it is the maximum over the unit circle.
    pub fn gradient_bound(&self) -> f64 {
        unit_circle(ANGLE_SAMPLES)
            .map(|z| {
                let (a, b) = self.grad_phi_unchecked(z);
                (a.norm_sqr() + b.norm_sqr()).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Same for the kernels `K_s`.
    pub fn kernel_bound(&self) -> f64 {
        unit_circle(ANGLE_SAMPLES)
            .map(|z| {
                let (a, b) = self.kernels(z).expect("nonzero");
                a.norm().max(b.norm())
            })
            .fold(0.0, f64::max)
    }

    /// `k₁` such that `⟨Φ, 𝓛φ⟩ = φ(0)`. The Laplacian and the Bitsadze
    /// operator use their closed forms; every other operator is calibrated
    /// numerically with [`Self::calibrate_k1_numeric`].
    pub fn calibrate_k1(&self) -> Result<C64> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        if [self.c11, self.c12, self.c22] == [one, zero, one] {
            return Ok(C64::new(1.0 / (4.0 * PI), 0.0));
        }
        if [self.c11, self.c12, self.c22] == [one * 0.25, C64::new(0.0, 0.25), -one * 0.25] {
            return Ok(C64::new(1.0 / PI, 0.0));
        }
        self.calibrate_k1_numeric()
    }

    /// Numerical calibration: pairs the unnormalized kernel with `𝓛φ` for
    /// two radial bumps `φ = (1 − |x|²/R²)^K` (`φ(0) = 1`) and inverts.
    pub fn calibrate_k1_numeric(&self) -> Result<C64> {
        let p1 = self.bump_pairing(3);
        let p2 = self.bump_pairing(6);
        let gap = (p1 - p2).norm() / p1.norm().max(p2.norm());
        if !(gap <= CALIBRATION_AGREEMENT) || p1.norm() == 0.0 {
            return Err(Error::CalibrationFailed(gap));
        }
        Ok(C64::new(1.0, 0.0) / p2)
    }

    /// `⟨Φ₀, 𝓛φ⟩` for `φ = F(|x|²/R²)`, `F(s) = (1 − s)^K`.
    ///
    /// In polar coordinates with `s = ρ²/R²` the pairing separates into
    /// radial moments of `F'`, `s F''` (exact, via `∫ s^j ln s = −1/(j+1)²`)
    /// and angular integrals of the kernel (trapezoid rule, spectrally
    /// accurate for the smooth periodic angular factor). `R` drops out.
    fn bump_pairing(&self, k: u32) -> C64 {
        let kf = k as f64;
        // F'(s) = -K (1-s)^{K-1}, s F''(s) = K(K-1) s (1-s)^{K-2}
        let fp: Vec<f64> = binomial_poly(k - 1).iter().map(|c| -kf * c).collect();
        let sfpp: Vec<f64> = std::iter::once(0.0)
            .chain(binomial_poly(k - 2).iter().map(|c| kf * (kf - 1.0) * c))
            .collect();
        let log_moment = |poly: &[f64]| -> f64 {
            poly.iter().enumerate().map(|(j, c)| -c / ((j + 1) as f64).powi(2)).sum()
        };
        // J_A = ∫ ½ ln s F'(s) ds,  J_B = ∫ ln s · s F''(s) ds
        let ja = 0.5 * log_moment(&fp);
        let jb = log_moment(&sfpp);
        // ∫F' = -1, ∫2sF'' = 2
        let (mut g0, mut g1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let n = ANGLE_SAMPLES;
        let dtheta = 2.0 * PI / n as f64;
        for z in unit_circle(n) {
            let g = self.phi_unnormalized(z).expect("unit circle");
            g0 += g * dtheta;
            g1 += g * self.symbol(z.re, z.im) * dtheta;
        }
        let tr = self.trace();
        let radial_log = if self.repeated { 0.0 } else { 1.0 + self.nu as f64 };
        // angular mean of L(θ) is tr/2, so ∫L dθ = π tr
        tr * radial_log * (2.0 * PI * ja + PI * jb) - tr * g0 + g1 * 2.0
    }

    /// Second-order central-difference realization of `𝓛`; the outer ring
    /// of samples is marked invalid.
    pub fn apply_l(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply_l_with(f, Stencil::Second)
    }

    /// Central-difference realization of `𝓛` of the given order; the outer
    /// `order/2` rings of samples are marked invalid.
    pub fn apply_l_with(&self, f: &GridFunction, stencil: Stencil) -> Result<GridFunction> {
        let g = f.grid;
        let r = stencil.radius();
        let need = 2 * r + 1;
        if g.nx < need || g.ny < need {
            return Err(Error::GridTooSmall { need, nx: g.nx, ny: g.ny });
        }
        let (nx, ny) = (g.nx, g.ny);
        let h2 = g.spacing * g.spacing;
        let (a, b, c) = (self.c11 / h2, self.c12 * 2.0 / h2, self.c22 / h2);
        let v = &f.values;
        let mut out = vec![C64::new(0.0, 0.0); nx * ny];
        out.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
            if iy < r || iy + r >= ny {
                return;
            }
            for ix in r..nx - r {
                let k = iy * nx + ix;
                let (dxx, dyy, dxy) = match stencil {
                    Stencil::Second => (
                        v[k + 1] - v[k] * 2.0 + v[k - 1],
                        v[k + nx] - v[k] * 2.0 + v[k - nx],
                        (v[k + nx + 1] - v[k - nx + 1] - v[k + nx - 1] + v[k - nx - 1]) * 0.25,
                    ),
                    Stencil::Fourth => {
                        let second = |s: usize| {
                            (-(v[k + 2 * s] + v[k - 2 * s]) + (v[k + s] + v[k - s]) * 16.0 - v[k] * 30.0) / 12.0
                        };
                        let first_x = |m: usize| (v[m - 2] - v[m + 2] + (v[m + 1] - v[m - 1]) * 8.0) / 12.0;
                        let dxy = (first_x(k - 2 * nx) - first_x(k + 2 * nx)
                            + (first_x(k + nx) - first_x(k - nx)) * 8.0)
                            / 12.0;
                        (second(1), second(nx), dxy)
                    }
                };
                row[ix] = a * dxx + b * dxy + c * dyy;
            }
        });
        Ok(GridFunction { grid: g, values: out, grad1: None, grad2: None, invalid_margin: f.invalid_margin + r })
    }
}

/// Accuracy order of the central-difference realization of `𝓛`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    Second,
    Fourth,
}

impl Stencil {
    pub fn radius(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }
}

/// Roots of `a λ² + b λ + c` avoiding cancellation, polished by one Newton step.
fn quadratic_roots(a: C64, b: C64, c: C64) -> (C64, C64) {
    let disc = (b * b - a * c * 4.0).sqrt();
    let s = if (b.conj() * disc).re >= 0.0 { disc } else { -disc };
    let q = -(b + s) * 0.5;
    let r1 = q / a;
    let r2 = if q.norm() > 0.0 { c / q } else { r1 };
    let polish = |r: C64| {
        let d = a * r * 2.0 + b;
        if d.norm() > 0.0 {
            r - (a * r * r + b * r + c) / d
        } else {
            r
        }
    };
    (polish(r1), polish(r2))
}

/// Coefficients of `(1 − s)^n` in increasing powers of `s`.
fn binomial_poly(n: u32) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; out.len() + 1];
        for (j, c) in out.iter().enumerate() {
            next[j] += c;
            next[j + 1] -= c;
        }
        out = next;
    }
    out
}

fn unit_circle(n: usize) -> impl Iterator<Item = C64> {
    (0..n).map(move |j| C64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn general_ops() -> Vec<EllipticOperator> {
        vec![
            EllipticOperator::new(c(1.0, 0.0), c(0.3, 0.0), c(2.0, 0.0)).unwrap(),
            EllipticOperator::new(c(1.0, 0.0), c(0.0, -1.5), c(-2.0, 0.0)).unwrap(),
            EllipticOperator::new(c(2.0, 0.5), c(0.4, -0.3), c(1.5, 1.0)).unwrap(),
        ]
    }

    #[test]
    fn laplacian_roots_and_coordinates() {
        let op = EllipticOperator::laplacian();
        assert_eq!(op.lambda1, c(0.0, 1.0));
        assert_eq!(op.lambda2, c(0.0, -1.0));
        assert_eq!(op.nu, 1);
        assert!(!op.repeated);
        let z = c(0.7, -0.2);
        let cc = op.coords(z);
        assert!((cc.z1 - z / 2.0).norm() < 1e-15);
        assert!((cc.z2 - z.conj() / 2.0).norm() < 1e-15);
    }

    #[test]
    fn bitsadze_is_repeated() {
        let op = EllipticOperator::bitsadze();
        assert!(op.repeated);
        assert!((op.lambda1 - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(op.lambda1, op.lambda2);
        assert_eq!(op.nu, -1);
        let z = c(0.7, -0.2);
        let cc = op.coords(z);
        assert!((cc.z1 - z.conj() / 2.0).norm() < 1e-15);
        assert!((cc.z2 - z / 2.0).norm() < 1e-15);
    }

    #[test]
    fn real_root_and_zero_operator_rejected() {
        assert!(matches!(
            EllipticOperator::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
            Err(Error::NotElliptic(_))
        ));
        assert!(matches!(
            EllipticOperator::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
            Err(Error::DegenerateOperator)
        ));
        // x₁² − x₂² vanishes on the diagonal
        assert!(matches!(
            EllipticOperator::new(c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
            Err(Error::NotElliptic(_))
        ));
        assert!(matches!(
            EllipticOperator::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)),
            Err(Error::NotElliptic(_))
        ));
    }

    #[test]
    fn closed_form_kernels_at_one() {
        let lap = EllipticOperator::laplacian();
        assert!(lap.phi(c(2.0, 0.0)).unwrap().norm() < 1e-15);
        assert!(lap.phi(c(0.0, 2.0)).unwrap().norm() < 1e-15);
        let k1 = 1.0 / (4.0 * PI);
        let (g1, g2) = lap.grad_phi(c(1.0, 0.0)).unwrap();
        assert!((g1 - c(2.0 * k1, 0.0)).norm() < 1e-15 && (g2 - c(2.0 * k1, 0.0)).norm() < 1e-15);
        assert_eq!(lap.kernels(c(1.0, 0.0)).unwrap(), (c(2.0, 0.0), c(2.0, 0.0)));

        let bit = EllipticOperator::bitsadze();
        assert!((bit.phi(c(1.0, 0.0)).unwrap() - c(1.0 / PI, 0.0)).norm() < 1e-15);
        let (g1, g2) = bit.grad_phi(c(1.0, 0.0)).unwrap();
        assert!((g1 - c(2.0 / PI, 0.0)).norm() < 1e-15 && (g2 + c(2.0 / PI, 0.0)).norm() < 1e-15);
        let (k1, k2) = bit.kernels(c(1.0, 0.0)).unwrap();
        assert!((k1 - c(2.0, 0.0)).norm() < 1e-15 && (k2 - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_point_reported() {
        let op = EllipticOperator::laplacian();
        assert_eq!(op.phi(c(0.0, 0.0)), Err(Error::SingularPoint));
        assert_eq!(op.grad_phi(c(0.0, 0.0)), Err(Error::SingularPoint));
        assert_eq!(op.kernels(c(0.0, 0.0)), Err(Error::SingularPoint));
        assert_eq!(op.coords(c(0.0, 0.0)), CanonicalCoords { z1: c(0.0, 0.0), z2: c(0.0, 0.0) });
    }

    #[test]
    fn numeric_calibration_matches_closed_forms() {
        let lap = EllipticOperator::laplacian();
        let k = lap.calibrate_k1_numeric().unwrap();
        assert!((k - c(1.0 / (4.0 * PI), 0.0)).norm() < 1e-10 / (4.0 * PI));
        let bit = EllipticOperator::bitsadze();
        let k = bit.calibrate_k1_numeric().unwrap();
        assert!((k - c(1.0 / PI, 0.0)).norm() < 1e-10 / PI);
    }

    #[test]
    fn calibration_scales_inversely_with_coefficients() {
        for op in general_ops() {
            let t = c(0.5, 2.0);
            let scaled = EllipticOperator::new(op.c11 * t, op.c12 * t, op.c22 * t).unwrap();
            assert!((scaled.k1 - op.k1 / t).norm() < 1e-10 * op.k1.norm());
        }
    }

    #[test]
    fn root_residuals_small() {
        for op in general_ops().into_iter().chain([EllipticOperator::laplacian(), EllipticOperator::bitsadze()]) {
            let scale = op.c11.norm() + op.c12.norm() + op.c22.norm();
            for (r, l) in op.root_residuals().iter().zip([op.lambda1, op.lambda2]) {
                assert!(*r <= 1e-12 * scale * (1.0 + l.norm_sqr()), "{r}");
            }
        }
    }

    #[test]
    fn orthogonality_by_finite_differences() {
        let h = 1e-3;
        for op in general_ops().into_iter().chain([EllipticOperator::laplacian(), EllipticOperator::bitsadze()]) {
            let z0 = c(0.3, -0.4);
            let d1 = |f: &dyn Fn(C64) -> C64| (f(z0 + h) - f(z0 - h)) / (2.0 * h);
            let d2 = |f: &dyn Fn(C64) -> C64| (f(z0 + c(0.0, h)) - f(z0 - c(0.0, h))) / (2.0 * h);
            let z1 = |z: C64| op.coords(z).z1;
            let z2 = |z: C64| op.coords(z).z2;
            let (a11, a12) = op.char_derivatives(d1(&z1), d2(&z1));
            let (a21, a22) = op.char_derivatives(d1(&z2), d2(&z2));
            assert!((a11 - 1.0).norm() < 1e-10, "{a11}");
            assert!(a12.norm() < 1e-10, "{a12}");
            assert!(a21.norm() < 1e-10, "{a21}");
            assert!((a22 - 1.0).norm() < 1e-10, "{a22}");
        }
    }

    #[test]
    fn grad_phi_matches_finite_differences_of_phi() {
        let h = 1e-5;
        for op in general_ops().into_iter().chain([EllipticOperator::laplacian(), EllipticOperator::bitsadze()]) {
            for z0 in [c(1.0, 0.0), c(-0.3, 0.8), c(-1.0, 1e-3), c(-0.5, -0.5)] {
                let f = |z: C64| op.phi(z).unwrap();
                let dx = (f(z0 + h) - f(z0 - h)) / (2.0 * h);
                let dy = (f(z0 + c(0.0, h)) - f(z0 - c(0.0, h))) / (2.0 * h);
                let want = op.char_derivatives(dx, dy);
                let got = op.grad_phi(z0).unwrap();
                let scale = got.0.norm() + got.1.norm();
                assert!((got.0 - want.0).norm() <= 1e-8 * scale, "{got:?} {want:?}");
                assert!((got.1 - want.1).norm() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn phi_is_continuous_across_the_negative_axis() {
        for op in general_ops() {
            let above = op.phi(c(-1.0, 1e-9)).unwrap();
            let below = op.phi(c(-1.0, -1e-9)).unwrap();
            assert!((above - below).norm() < 1e-7, "{above} {below}");
        }
    }

    #[test]
    fn apply_is_exact_on_quadratics() {
        let g = crate::grid::GridSpec::square(-1.0, 1.0, 0.05).unwrap();
        let lap = EllipticOperator::laplacian();
        let f = GridFunction::from_fn(g, |z| c(z.re * z.re, 0.0));
        let lf = lap.apply_l(&f).unwrap();
        assert_eq!(lf.invalid_margin, 1);
        for iy in 1..g.ny - 1 {
            for ix in 1..g.nx - 1 {
                assert!((lf.at(ix, iy) - c(2.0, 0.0)).norm() < 1e-10);
            }
        }
        let harm = GridFunction::from_fn(g, |z| c((z * z).re, 0.0));
        assert!(lap.apply_l(&harm).unwrap().values.iter().all(|v| v.norm() < 1e-10));
        let bit = EllipticOperator::bitsadze();
        let lf = bit.apply_l(&f).unwrap();
        assert!((lf.at(10, 12) - c(0.5, 0.0)).norm() < 1e-10);
        let mixed = GridFunction::from_fn(g, |z| c(z.re * z.im, 0.0));
        let op = &general_ops()[2];
        assert!((op.apply_l(&mixed).unwrap().at(7, 30) - op.c12 * 2.0).norm() < 1e-10);
    }

    #[test]
    fn fourth_order_stencil_is_exact_on_quartics() {
        let g = crate::grid::GridSpec::square(-1.0, 1.0, 0.05).unwrap();
        let op = &general_ops()[2];
        let f = GridFunction::from_fn(g, |z| c(z.re.powi(4) + z.re * z.im.powi(3), z.re * z.re * z.im * z.im));
        let lf = op.apply_l_with(&f, Stencil::Fourth).unwrap();
        assert_eq!(lf.invalid_margin, 2);
        let z = g.point(13, 29);
        let (x, y) = (z.re, z.im);
        // ∂xx, ∂xy, ∂yy of the test polynomial
        let fxx = c(12.0 * x * x, 2.0 * y * y);
        let fxy = c(3.0 * y * y, 4.0 * x * y);
        let fyy = c(6.0 * x * y, 2.0 * x * x);
        let want = op.c11 * fxx + op.c12 * fxy * 2.0 + op.c22 * fyy;
        assert!((lf.at(13, 29) - want).norm() < 1e-9, "{} {want}", lf.at(13, 29));
    }

    #[test]
    fn apply_rejects_tiny_grids() {
        let g = crate::grid::GridSpec::new(c(0.0, 0.0), 0.1, 2, 5).unwrap();
        let f = GridFunction::zeros(g);
        assert!(matches!(EllipticOperator::laplacian().apply_l(&f), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn coord_matrix_agrees_with_coords() {
        for op in general_ops() {
            let z = c(0.37, -1.2);
            for s in 1..=2 {
                let m = op.coord_matrix(s);
                let w = c(m[0][0] * z.re + m[0][1] * z.im, m[1][0] * z.re + m[1][1] * z.im);
                let cc = op.coords(z);
                let want = if s == 1 { cc.z1 } else { cc.z2 };
                assert!((w - want).norm() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn kernels_and_gradients_are_odd(x in -3.0f64..3.0, y in -3.0f64..3.0, which in 0usize..5) {
            prop_assume!(x.abs() + y.abs() > 1e-6);
            let mut ops = general_ops();
            ops.push(EllipticOperator::laplacian());
            ops.push(EllipticOperator::bitsadze());
            let op = &ops[which];
            let z = c(x, y);
            let (a, b) = op.grad_phi(z).unwrap();
            let (am, bm) = op.grad_phi(-z).unwrap();
            prop_assert!((a + am).norm() <= 1e-14 * a.norm().max(1.0));
            prop_assert!((b + bm).norm() <= 1e-14 * b.norm().max(1.0));
            let (k1, k2) = op.kernels(z).unwrap();
            let (k1m, k2m) = op.kernels(-z).unwrap();
            prop_assert!((k1 + k1m).norm() <= 1e-14 * k1.norm().max(1.0));
            prop_assert!((k2 + k2m).norm() <= 1e-14 * k2.norm().max(1.0));
        }
    }
}
