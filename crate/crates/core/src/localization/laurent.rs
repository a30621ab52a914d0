//! Laurent coefficients of potentials `g = Φ * T` of compactly supported
//! distributions, and log-log fits of their far-field decay.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::C64;

pub const DEFAULT_M_MAX: usize = 8;
pub const DEFAULT_K4: f64 = 8.0;

/// A point mass `weight·δ_position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub position: C64,
    pub weight: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootCase {
    Distinct,
    Repeated,
}

/// Coefficients of
///
/// * distinct roots: `g(z) = c₀Φ(z−a) + Σ_m c_m¹/u₁^m + c_m²/u₂^m`,
/// * repeated root: `g(z) = c₀Φ(z−a) + Σ_m c_m¹/u₂^m + c_m² u₁/u₂^{m+1}`,
///
/// with `u_s = (z−a)_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentCoeffs {
    pub center: C64,
    pub c0: C64,
    /// `(c₁¹, c₁²)`.
    pub c1s: (C64, C64),
    /// `(c_m¹, c_m²)` for `m = 1..=m_max`; the first entry repeats `c1s`.
    pub higher: Vec<(C64, C64)>,
    pub case_tag: RootCase,
    /// Radius of the smallest disc about `center` holding the support.
    pub support_radius: f64,
}

/// `c₀ = ⟨T, 1⟩` and the higher coefficients up to `m_max ≥ 1`.
pub fn laurent_coeffs(op: &EllipticOperator, sources: &[PointSource], a: C64, m_max: usize) -> LaurentCoeffs {
    let m_max = m_max.max(1);
    let mut c0 = C64::new(0.0, 0.0);
    let mut p1 = vec![C64::new(0.0, 0.0); m_max + 1];
    let mut p2 = vec![C64::new(0.0, 0.0); m_max + 1];
    let mut mixed = vec![C64::new(0.0, 0.0); m_max + 1];
    let mut radius = 0.0f64;
    for s in sources {
        if s.weight == C64::new(0.0, 0.0) {
            continue;
        }
        c0 += s.weight;
        let d = s.position - a;
        radius = radius.max(d.norm());
        let v = op.coords(d);
        // p_s[m] = Σ w v_s^m, mixed[m] = Σ w v₁ v₂^{m−1}
        let (mut a1, mut a2) = (s.weight, s.weight);
        for m in 1..=m_max {
            mixed[m] += a2 * v.z1;
            a1 *= v.z1;
            a2 *= v.z2;
            p1[m] += a1;
            p2[m] += a2;
        }
    }
    let k1 = op.k1;
    let nu = op.nu as f64;
    let higher: Vec<(C64, C64)> = (1..=m_max)
        .map(|m| {
            if op.repeated {
                (-k1 * mixed[m], k1 * p2[m])
            } else {
                let mf = m as f64;
                (-k1 * p1[m] / mf, -k1 * nu * p2[m] / mf)
            }
        })
        .collect();
    LaurentCoeffs {
        center: a,
        c0,
        c1s: higher[0],
        higher,
        case_tag: if op.repeated { RootCase::Repeated } else { RootCase::Distinct },
        support_radius: radius,
    }
}

impl LaurentCoeffs {
    pub fn m_max(&self) -> usize {
        self.higher.len()
    }

    /// Series truncated after order `order` (`0` keeps only `c₀Φ`).
    pub fn series(&self, op: &EllipticOperator, z: C64, order: usize) -> Result<C64> {
        let u = op.coords(z - self.center);
        let mut acc = self.c0 * op.phi(z - self.center)?;
        for (m, (a, b)) in self.higher.iter().take(order).enumerate() {
            let m = m as i32 + 1;
            acc += if op.repeated {
                a / u.z2.powi(m) + b * u.z1 / u.z2.powi(m + 1)
            } else {
                a / u.z1.powi(m) + b / u.z2.powi(m)
            };
        }
        Ok(acc)
    }

    /// Characteristic gradient `(∂₁, ∂₂)` of [`Self::series`].
    pub fn series_grad(&self, op: &EllipticOperator, z: C64, order: usize) -> Result<(C64, C64)> {
        let (g1, g2) = op.grad_phi(z - self.center)?;
        let (mut d1, mut d2) = (self.c0 * g1, self.c0 * g2);
        let u = op.coords(z - self.center);
        for (m, (a, b)) in self.higher.iter().take(order).enumerate() {
            let m = m as i32 + 1;
            let mf = m as f64;
            if op.repeated {
                // ∂₁u₁ = 1, ∂₁u₂ = 0, ∂₂u₂ = 1, ∂₂u₁ = 0
                d1 += b / u.z2.powi(m + 1);
                d2 += -a * mf / u.z2.powi(m + 1) - b * (mf + 1.0) * u.z1 / u.z2.powi(m + 2);
            } else {
                d1 += -a * mf / u.z1.powi(m + 1);
                d2 += -b * mf / u.z2.powi(m + 1);
            }
        }
        Ok((d1, d2))
    }
}

/// Exact potential `g(z) = Σ w_p Φ(z − p)` of point sources.
pub fn potential(op: &EllipticOperator, sources: &[PointSource], z: C64) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for s in sources {
        acc += s.weight * op.phi(z - s.position)?;
    }
    Ok(acc)
}

/// Characteristic gradient of [`potential`].
pub fn potential_grad(op: &EllipticOperator, sources: &[PointSource], z: C64) -> Result<(C64, C64)> {
    let (mut a, mut b) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for s in sources {
        let (g1, g2) = op.grad_phi(z - s.position)?;
        a += s.weight * g1;
        b += s.weight * g2;
    }
    Ok((a, b))
}

/// Source of far-field samples.
#[derive(Debug, Clone, Copy)]
pub enum FarField<'a> {
    /// Potential of point sources, evaluated exactly anywhere.
    Sources(&'a [PointSource]),
    /// Sampled function with gradients (stored or finite-difference),
    /// interpolated bilinearly; the annuli must lie inside its grid.
    Grid(&'a GridFunction),
}

/// Geometric radii `r_inner = r_0 < … < r_outer` at which the maximum over
/// `n_angles` directions is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    pub n_radii: usize,
    pub n_angles: usize,
    /// Convergence-region factor: `r_inner` must exceed `k4·r_T`.
    pub k4: f64,
}

impl AnnulusSpec {
    /// Radii from `(1 + 1/16)·k4·r_T` over four octaves, with the default `k4`.
    pub fn for_support(r_t: f64) -> Self {
        Self::with_k4(r_t, DEFAULT_K4)
    }

    pub fn with_k4(r_t: f64, k4: f64) -> Self {
        let r_inner = k4 * r_t * (1.0 + 1.0 / 16.0);
        AnnulusSpec { r_inner, r_outer: 16.0 * r_inner, n_radii: 9, n_angles: 64, k4 }
    }

    pub fn radii(&self) -> Vec<f64> {
        let n = self.n_radii.max(2);
        let q = (self.r_outer / self.r_inner).powf(1.0 / (n - 1) as f64);
        (0..n).map(|k| self.r_inner * q.powi(k as i32)).collect()
    }
}

/// Log-log least-squares slope with a 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub label: String,
    pub expected: f64,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `max_θ |∇(…)|` at each radius.
    pub values: Vec<f64>,
}

impl SlopeFit {
    pub fn within(&self, tol: f64) -> bool {
        (self.slope - self.expected).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub center: C64,
    pub support_radius: f64,
    pub radii: Vec<f64>,
    /// `|∇g|`, `|∇(g − c₀Φ)|` and `|∇(g − c₀Φ − first-order terms)|`,
    /// expected to decay like `|z−a|^{−1}`, `^{−2}`, `^{−3}`.
    pub fits: Vec<SlopeFit>,
}

/// Fits the decay of `|∇g|`, `|∇(g − c₀Φ)|` and the second-order remainder.
pub fn farfield_decay_check(
    op: &EllipticOperator,
    g: FarField<'_>,
    coeffs: &LaurentCoeffs,
    annuli: &AnnulusSpec,
) -> Result<DecayReport> {
    let limit = annuli.k4 * coeffs.support_radius;
    if !(annuli.r_inner > limit) {
        return Err(Error::AnnulusInsideSupport { inner: annuli.r_inner, limit });
    }
    if !(annuli.r_outer > annuli.r_inner) || annuli.n_radii < 3 || annuli.n_angles == 0 {
        return Err(Error::InvalidParameter("annulus spec needs r_outer > r_inner, ≥ 3 radii and ≥ 1 angle".into()));
    }
    let radii = annuli.radii();
    let grid_grads = match g {
        FarField::Grid(f) => {
            let a = coeffs.center;
            if !f.grid.contains_disc(a, annuli.r_outer, f.invalid_margin + 1) {
                return Err(Error::DiscOutsideGrid { center: format!("{a}"), radius: annuli.r_outer });
            }
            Some(match f.gradients() {
                Ok((g1, g2)) => (g1.to_vec(), g2.to_vec()),
                Err(_) => crate::grid::fd_gradient(&f.grid, &f.values),
            })
        }
        FarField::Sources(_) => None,
    };
    let mut vals = vec![vec![0.0f64; radii.len()]; 3];
    for (ri, &r) in radii.iter().enumerate() {
        for k in 0..annuli.n_angles {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / annuli.n_angles as f64;
            let z = coeffs.center + C64::from_polar(r, theta);
            let (d1, d2) = match (g, &grid_grads) {
                (FarField::Sources(s), _) => potential_grad(op, s, z)?,
                (FarField::Grid(f), Some((gx, gy))) => {
                    let fx = crate::grid::bilinear(&f.grid, gx, z).expect("inside grid");
                    let fy = crate::grid::bilinear(&f.grid, gy, z).expect("inside grid");
                    op.char_derivatives(fx, fy)
                }
                _ => unreachable!(),
            };
            for (order, slot) in vals.iter_mut().enumerate() {
                let (e1, e2) = if order == 0 {
                    (d1, d2)
                } else {
                    let (s1, s2) = coeffs.series_grad(op, z, order - 1)?;
                    (d1 - s1, d2 - s2)
                };
                let mag = (e1.norm_sqr() + e2.norm_sqr()).sqrt();
                slot[ri] = slot[ri].max(mag);
            }
        }
    }
    let labels = ["grad", "grad_minus_c0", "grad_minus_order1"];
    let fits = vals
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let (slope, half) = loglog_fit(&radii, &v);
            SlopeFit {
                label: labels[k].to_string(),
                expected: -(k as f64 + 1.0),
                slope,
                ci_low: slope - half,
                ci_high: slope + half,
                values: v,
            }
        })
        .collect();
    Ok(DecayReport { center: coeffs.center, support_radius: coeffs.support_radius, radii, fits })
}

/// Slope of `log y` against `log x` and the half-width of its 95% interval.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &b)| b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if n < 3 {
        return (slope, f64::INFINITY);
    }
    let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (sse / (n - 2) as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("dof ≥ 1").inverse_cdf(0.975);
    (slope, t * se)
}
