//! Scanner for the oscillation/capacity criterion
//! `|O_{B(a,r)}(f)| ≤ ω(r)·α₁(B(a,kr) \ X)`.
//!
//! The scan reports ratio trends over a family of discs. It never issues an
//! approximability verdict: the criterion quantifies over all discs and the
//! capacity is known only up to absolute constants.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::capacity::capacity_interval;
use super::mask::CompactSetMask;
use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::oscillation::{l_oscillation, modulus_of_continuity, Disc, DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL, DILATION};
use crate::C64;

pub const REPORT_SCHEMA: &str = "ecap-report/1";
/// Radii must be resolved by at least this many cells.
pub const MIN_CELLS_PER_RADIUS: f64 = 32.0;
pub const DISCLAIMER: &str = "Capacities are bracketed only up to unknown absolute constants \
(the comparison constants between the curvature bound, the diameter and the capacity are not quantified). \
Ratios indicate trends over the scanned discs and are not a membership verdict.";

/// Where the disc centers are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterSpec {
    Points { points: Vec<C64> },
    /// Points of the lattice `step·ℤ²` lying in `X`.
    InSet { step: f64 },
    /// Points of `step·ℤ²` with `B(a, k·max r) ⊂ X`.
    Deep { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub radii: Vec<f64>,
    pub k: f64,
    pub centers: CenterSpec,
    pub function_id: String,
    /// Oscillations below `zero_tol·‖f‖_{C¹}` count as vanishing.
    pub zero_tol: f64,
    /// The constant `A` in `ω(r) = A·ω(∇f, r)`.
    #[serde(default = "unit")]
    pub omega_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl ScanConfig {
    pub fn new(radii: Vec<f64>, centers: CenterSpec) -> Self {
        ScanConfig { radii, k: 1.0, centers, function_id: "f".into(), zero_tol: 1e-6, omega_scale: 1.0 }
    }
}

/// `|O|/(ω·cap)`, serialized as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub(crate) fn of(osc: f64, denom: f64, vanishing: bool) -> Ratio {
        if vanishing {
            Ratio::Finite(0.0)
        } else if denom > 0.0 {
            Ratio::Finite(osc / denom)
        } else {
            Ratio::Infinite
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Ratio::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Ratio::Finite(x) => Some(*x),
            Ratio::Infinite => None,
        }
    }

    fn max(self, other: Ratio) -> Ratio {
        match (self, other) {
            (Ratio::Finite(a), Ratio::Finite(b)) => Ratio::Finite(a.max(b)),
            _ => Ratio::Infinite,
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(x) => s.serialize_f64(*x),
            Ratio::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Ratio::Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(Ratio::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad ratio {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscRecord {
    pub center: C64,
    pub radius: f64,
    pub oscillation: C64,
    /// `ω(r)`, the modulus of continuity of `∇f`.
    pub omega: f64,
    /// Capacity interval of `B(a, kr) \ X`.
    pub cap_lower: f64,
    pub cap_upper: f64,
    /// `|O|/(ω·cap_lower)`.
    pub ratio_lower: Ratio,
    /// `|O|/(ω·cap_upper)`.
    pub ratio_upper: Ratio,
    pub vanishing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub radius: f64,
    pub omega: f64,
    pub discs: usize,
    pub infinite: usize,
    pub vanishing: usize,
    pub max_ratio_lower: Ratio,
    pub max_ratio_upper: Ratio,
    /// Quantiles of the finite `ratio_lower` values.
    pub median_ratio_lower: Option<f64>,
    pub p90_ratio_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub schema: String,
    pub operator: [C64; 3],
    pub function_id: String,
    pub k: f64,
    pub radii: Vec<f64>,
    pub centers: Vec<C64>,
    /// `‖f‖_{C¹}` on the grid.
    pub scale: f64,
    pub records: Vec<DiscRecord>,
    pub per_radius: Vec<RadiusSummary>,
    pub config: ScanConfig,
    pub disclaimer: String,
}

impl CriterionReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn lattice_in_set(x: &CompactSetMask, step: f64) -> Result<Vec<C64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("center step {step}")));
    }
    let g = x.grid;
    let (lo, hi) = (g.origin, g.far_corner());
    let (i0, i1) = ((lo.re / step).ceil() as i64, (hi.re / step).floor() as i64);
    let (j0, j1) = ((lo.im / step).ceil() as i64, (hi.im / step).floor() as i64);
    Ok((j0..=j1)
        .flat_map(|j| (i0..=i1).map(move |i| C64::new(i as f64 * step, j as f64 * step)))
        .filter(|&z| x.contains(z))
        .collect())
}

fn resolve_centers(x: &CompactSetMask, cfg: &ScanConfig) -> Result<Vec<C64>> {
    match &cfg.centers {
        CenterSpec::Points { points } => Ok(points.clone()),
        CenterSpec::InSet { step } => lattice_in_set(x, *step),
        CenterSpec::Deep { step } => {
            let reach = cfg.k * cfg.radii.iter().copied().fold(0.0, f64::max);
            let cands = lattice_in_set(x, *step)?;
            Ok(cands
                .into_par_iter()
                .filter(|&a| x.region_in_disc(&Disc { center: a, radius: reach }).is_empty())
                .collect())
        }
    }
}

/// Oscillation, `ω(r)` and the capacity interval of `B(a, kr) \ X` for every
/// center and radius, in center-major order.
///
/// For `k > 1` the lower capacity end is the larger of the bounds for
/// `B(a, kr) \ X` and for its subset `B(a, r) \ X`, so it never decreases
/// when `k` grows from 1.
pub fn criterion_scan(op: &EllipticOperator, f: &GridFunction, x: &CompactSetMask, cfg: &ScanConfig) -> Result<CriterionReport> {
    if !(cfg.k >= 1.0 && cfg.k.is_finite()) {
        return Err(Error::InvalidParameter(format!("k = {} < 1", cfg.k)));
    }
    if !(cfg.omega_scale > 0.0 && cfg.omega_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega_scale = {}", cfg.omega_scale)));
    }
    if cfg.radii.is_empty() || cfg.radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("radii must be a nonempty list of positive numbers".into()));
    }
    let r_min = cfg.radii.iter().copied().fold(f64::INFINITY, f64::min);
    let spacing = f.grid.spacing.max(x.grid.spacing);
    if spacing > r_min / MIN_CELLS_PER_RADIUS {
        return Err(Error::ResolutionTooCoarse { spacing, limit: r_min / MIN_CELLS_PER_RADIUS });
    }
    let centers = resolve_centers(x, cfg)?;
    if centers.is_empty() {
        return Err(Error::InvalidParameter("no scan centers".into()));
    }
    let margin = if f.invalid_margin > 0 { f.invalid_margin + 1 } else { 0 };
    for &a in &centers {
        for &r in &cfg.radii {
            if !f.grid.contains_disc(a, r * cfg.k.max(DILATION), margin) {
                return Err(Error::DiscOutsideGrid { center: format!("{a}"), radius: cfg.k * r });
            }
        }
    }
    let with_grad;
    let fg = if f.has_gradients() {
        f
    } else {
        with_grad = f.clone().with_fd_gradients();
        &with_grad
    };
    let scale = fg.c1_norm();
    let floor = cfg.zero_tol * scale;
    let omegas = cfg
        .radii
        .iter()
        .map(|&r| modulus_of_continuity(fg, r).map(|w| cfg.omega_scale * w))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(C64, usize)> = centers.iter().flat_map(|&a| (0..cfg.radii.len()).map(move |ri| (a, ri))).collect();
    let records = jobs
        .par_iter()
        .map(|&(a, ri)| {
            let r = cfg.radii[ri];
            let osc = l_oscillation(op, f, &Disc { center: a, radius: r }, DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL)?;
            let (mut lower, upper) = capacity_interval(&x.region_in_disc(&Disc { center: a, radius: cfg.k * r }));
            if cfg.k > 1.0 {
                lower = lower.max(capacity_interval(&x.region_in_disc(&Disc { center: a, radius: r })).0);
            }
            let omega = omegas[ri];
            let vanishing = osc.norm() <= floor;
            Ok(DiscRecord {
                center: a,
                radius: r,
                oscillation: osc,
                omega,
                cap_lower: lower,
                cap_upper: upper,
                ratio_lower: Ratio::of(osc.norm(), omega * lower, vanishing),
                ratio_upper: Ratio::of(osc.norm(), omega * upper, vanishing),
                vanishing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_radius = cfg
        .radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| summarize(r, omegas[ri], records.iter().skip(ri).step_by(cfg.radii.len())))
        .collect();
    Ok(CriterionReport {
        schema: REPORT_SCHEMA.into(),
        operator: op.coefficients(),
        function_id: cfg.function_id.clone(),
        k: cfg.k,
        radii: cfg.radii.clone(),
        centers,
        scale,
        records,
        per_radius,
        config: cfg.clone(),
        disclaimer: DISCLAIMER.into(),
    })
}

fn summarize<'a>(radius: f64, omega: f64, recs: impl Iterator<Item = &'a DiscRecord>) -> RadiusSummary {
    let mut s = RadiusSummary {
        radius,
        omega,
        discs: 0,
        infinite: 0,
        vanishing: 0,
        max_ratio_lower: Ratio::Finite(0.0),
        max_ratio_upper: Ratio::Finite(0.0),
        median_ratio_lower: None,
        p90_ratio_lower: None,
    };
    let mut finite = Vec::new();
    for rec in recs {
        s.discs += 1;
        s.infinite += rec.ratio_lower.is_infinite() as usize;
        s.vanishing += rec.vanishing as usize;
        s.max_ratio_lower = s.max_ratio_lower.max(rec.ratio_lower);
        s.max_ratio_upper = s.max_ratio_upper.max(rec.ratio_upper);
        finite.extend(rec.ratio_lower.finite());
    }
    finite.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let rank = |q: f64| finite.get(((q * finite.len() as f64).ceil() as usize).saturating_sub(1)).copied();
    s.median_ratio_lower = rank(0.5);
    s.p90_ratio_lower = rank(0.9);
    s
}
