//! Menger curvature of point triples, curvature energy `c²(μ)` of discrete
//! measures, linear-growth profiles and the curvature-based lower bound for
//! analytic capacity.
//!
//! Capacity values produced here are bounds only up to the unspecified
//! absolute constants of the measure characterization of `γ`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::Neumaier;
use crate::C64;

/// Roundoff allowance, in units of machine epsilon, of the collinearity test.
const COLLINEAR_ULPS: f64 = 16.0;

/// Caveat attached to every capacity value derived from curvature.
pub const CAPACITY_CAVEAT: &str =
    "lower bound for analytic capacity up to unspecified absolute constants";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Vec<C64>,
    weights: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<C64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter("points and weights differ in length".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight {w} is not a finite nonnegative number")));
        }
        if points.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite point".into()));
        }
        let total = crate::summation::compensated_sum(weights.iter().copied());
        Ok(Self { points, weights, total })
    }

    /// Equal weights `w` on every point.
    pub fn uniform(points: Vec<C64>, w: f64) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplies every weight by `t ≥ 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.points.clone(), self.weights.iter().map(|w| w * t).collect())
    }

    /// Removes the point at `index`.
    pub fn without(&self, index: usize) -> Result<Self> {
        let mut p = self.points.clone();
        let mut w = self.weights.clone();
        p.remove(index);
        w.remove(index);
        Self::new(p, w)
    }

    pub fn map_points(&self, f: impl Fn(C64) -> C64) -> Result<Self> {
        Self::new(self.points.iter().map(|&p| f(p)).collect(), self.weights.clone())
    }

    /// Reads the `x,y,w` CSV format.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["x", "y", "w"] {
            return Err(Error::Format(format!("expected header x,y,w, got {}", names.join(","))));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.deserialize::<PointRecord>() {
            let rec = rec?;
            points.push(C64::new(rec.x, rec.y));
            weights.push(rec.w);
        }
        Self::new(points, weights).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            wtr.serialize(PointRecord { x: p.re, y: p.im, w: *w })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    x: f64,
    y: f64,
    w: f64,
}

/// `1/R(z, w, ξ)` for the circle through three points; `0` for coincident
/// or collinear triples. The points are put in a canonical order first so
/// that the value is bit-identical under every permutation.
pub fn menger_curvature(z: C64, w: C64, xi: C64) -> f64 {
    let mut p = [z, w, xi];
    p.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite points"));
    let [a, b, c] = p;
    let scale = coordinate_scale(&p);
    let u = b - a;
    let v = c - a;
    let cross = u.re * v.im - u.im * v.re;
    curvature_sq_from_parts(cross, u.norm_sqr(), v.norm_sqr(), (c - b).norm_sqr(), roundoff_sq(scale)).sqrt()
}

fn coordinate_scale(p: &[C64]) -> f64 {
    p.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
}

/// `(k ε)²`; the scale-dependent part is multiplied by the coordinate scale squared.
fn roundoff_sq(scale: f64) -> f64 {
    let e = COLLINEAR_ULPS * f64::EPSILON;
    e * e * scale * scale
}

/// `c² = 4 cross² / (|ab|² |ac|² |bc|²)`, or `0` when a side vanishes or
/// `cross` is within the rounding error of the difference vectors
/// (`‖δu‖ ≲ ε·scale`), in which case the triple is treated as collinear.
#[inline(always)]
fn curvature_sq_from_parts(cross: f64, dab: f64, dac: f64, dbc: f64, tol_sq: f64) -> f64 {
    let e = COLLINEAR_ULPS * f64::EPSILON;
    let noise = tol_sq * (dab + dac) + e * e * dab * dac;
    if dab > 0.0 && dac > 0.0 && dbc > 0.0 && cross * cross > noise {
        4.0 * cross * cross / (dab * dac * dbc)
    } else {
        0.0
    }
}

/// Curvature energy `c²(μ) = ∭ c(z,w,ξ)² dμ dμ dμ`, summed as `6 Σ_{i<j<k}`.
///
/// Work is split by the first index; each index's contribution is summed
/// sequentially and the per-index partials are combined in index order with
/// compensated summation, so the result does not depend on the number of
/// worker threads.
pub fn curvature_energy(mu: &DiscreteMeasure) -> f64 {
    let n = mu.len();
    if n < 3 {
        return 0.0;
    }
    let xs: Vec<f64> = mu.points.iter().map(|p| p.re).collect();
    let ys: Vec<f64> = mu.points.iter().map(|p| p.im).collect();
    let ws = &mu.weights;
    let tol_sq = roundoff_sq(coordinate_scale(&mu.points));
    let partials: Vec<f64> = (0..n - 2)
        .into_par_iter()
        .map(|i| energy_row(i, &xs, &ys, ws, tol_sq))
        .collect();
    let total: Neumaier = partials.into_iter().collect();
    6.0 * total.value()
}

/// `Σ_{j>i} Σ_{k>j} w_i w_j w_k c²(p_i, p_j, p_k)`.
fn energy_row(i: usize, xs: &[f64], ys: &[f64], ws: &[f64], tol_sq: f64) -> f64 {
    let n = xs.len();
    let (xi, yi, wi) = (xs[i], ys[i], ws[i]);
    if wi == 0.0 {
        return 0.0;
    }
    let mut acc = Neumaier::new();
    for j in i + 1..n - 1 {
        let wj = ws[j];
        if wj == 0.0 {
            continue;
        }
        let (ux, uy) = (xs[j] - xi, ys[j] - yi);
        let dij = ux * ux + uy * uy;
        let (xj, yj) = (xs[j], ys[j]);
        let mut inner = 0.0;
        for k in j + 1..n {
            let (vx, vy) = (xs[k] - xi, ys[k] - yi);
            let dik = vx * vx + vy * vy;
            let (ex, ey) = (xs[k] - xj, ys[k] - yj);
            let djk = ex * ex + ey * ey;
            let cross = ux * vy - uy * vx;
            inner += ws[k] * curvature_sq_from_parts(cross, dij, dik, djk, tol_sq);
        }
        acc.add(wi * wj * inner);
    }
    acc.value()
}

/// Linear-growth profile of a discrete measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    /// `A₀ = max μ(B̄(z,r))/r` over centers at the support points and radii
    /// at the pairwise distances; `+∞` when no positive distance exists.
    pub constant: f64,
    /// Center and radius attaining `constant`.
    pub witness: Option<(C64, f64)>,
    /// `(r, max_z μ(B(z,r))/r)` for dyadic `r` from the diameter down to
    /// below an eighth of the minimum gap.
    pub small_scale: Vec<(f64, f64)>,
}

impl GrowthProfile {
    pub fn is_infinite(&self) -> bool {
        self.constant.is_infinite()
    }
}

/// Linear-growth constant over the finite family of centers at data points
/// and radii at pairwise distances. The supremum over all discs can exceed
/// this value by at most a factor 2; the family value is reported as is.
pub fn growth_profile(mu: &DiscreteMeasure) -> GrowthProfile {
    let n = mu.len();
    let pts = &mu.points;
    let ws = &mu.weights;
    let per_center: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, f64)> = (0..n).map(|j| ((pts[j] - pts[i]).norm(), ws[j])).collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
            let mut best = (0.0, 0.0);
            let mut mass = 0.0;
            let mut k = 0;
            while k < d.len() {
                let r = d[k].0;
                while k < d.len() && d[k].0 == r {
                    mass += d[k].1;
                    k += 1;
                }
                if r > 0.0 {
                    let ratio = mass / r;
                    if ratio > best.0 {
                        best = (ratio, r);
                    }
                }
            }
            best
        })
        .collect();
    let mut constant = 0.0;
    let mut witness = None;
    let mut any_positive = false;
    for (i, &(ratio, r)) in per_center.iter().enumerate() {
        if r > 0.0 {
            any_positive = true;
        }
        if r > 0.0 && ratio > constant {
            constant = ratio;
            witness = Some((pts[i], r));
        }
    }
    if n > 0 && !any_positive && mu.total > 0.0 {
        constant = f64::INFINITY;
    }
    GrowthProfile { constant, witness, small_scale: small_scale_profile(mu) }
}

fn small_scale_profile(mu: &DiscreteMeasure) -> Vec<(f64, f64)> {
    let n = mu.len();
    if n == 0 {
        return Vec::new();
    }
    let pts = &mu.points;
    let (mut diam, mut gap) = (0.0f64, f64::INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let d = (pts[i] - pts[j]).norm();
            diam = diam.max(d);
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    if diam == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut r = diam;
    while r >= gap / 8.0 && out.len() < 64 {
        let best = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| (pts[j] - pts[i]).norm() < r)
                    .map(|j| mu.weights[j])
                    .sum::<f64>()
                    / r
            })
            .reduce(|| 0.0, f64::max);
        out.push((r, best));
        r /= 2.0;
    }
    out
}

/// Details of the curvature capacity bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub t_star: f64,
    pub growth_constant: f64,
    pub energy: f64,
    pub total_mass: f64,
    pub caveat: String,
}

/// Largest scaling `t` with `t·A₀ ≤ 1` and `t³c²(μ) ≤ t‖μ‖`, and the
/// resulting bound `t‖μ‖`.
pub fn capacity_estimate(mu: &DiscreteMeasure) -> Result<CapacityEstimate> {
    if mu.is_empty() || mu.total <= 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let growth = growth_profile(mu);
    let energy = curvature_energy(mu);
    let t_growth = if growth.constant > 0.0 { 1.0 / growth.constant } else { f64::INFINITY };
    let t_energy = if energy > 0.0 { (mu.total / energy).sqrt() } else { f64::INFINITY };
    let t_star = t_growth.min(t_energy);
    Ok(CapacityEstimate {
        value: t_star * mu.total,
        t_star,
        growth_constant: growth.constant,
        energy,
        total_mass: mu.total,
        caveat: CAPACITY_CAVEAT.to_string(),
    })
}

/// `t*·‖μ‖`, see [`capacity_estimate`].
pub fn capacity_lower_bound(mu: &DiscreteMeasure) -> Result<f64> {
    capacity_estimate(mu).map(|e| e.value)
}

/// Push-forward under the real linear map `x ↦ M x`.
pub fn pushforward_linear(mu: &DiscreteMeasure, m: [[f64; 2]; 2]) -> Result<DiscreteMeasure> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let norm2: f64 = m.iter().flatten().map(|x| x * x).sum();
    if !(det.abs() > 1e-14 * norm2) {
        return Err(Error::SingularMap(det));
    }
    mu.map_points(|p| C64::new(m[0][0] * p.re + m[0][1] * p.im, m[1][0] * p.re + m[1][1] * p.im))
}

/// Singular values `(σ_max, σ_min)` of a real 2×2 matrix.
pub fn singular_values(m: [[f64; 2]; 2]) -> (f64, f64) {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let s1 = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((s1 + disc) / 2.0).sqrt();
    let smin = if smax > 0.0 { det / smax } else { 0.0 };
    (smax, smin)
}
