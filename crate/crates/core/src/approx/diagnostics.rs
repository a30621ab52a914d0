//! Capacity-normalized sizes of the leading Laurent coefficients of
//! localized pieces. The coefficients are bounded by `A·ω(∇f,δ)·α₁(G_j)`
//! and `A·ω(∇f,δ)·δ·α₁(G_j)` with `G_j = B(a_j, (k+2)δ) \ X` and an
//! unspecified `A`, so only the ratios are reported.

use serde::{Deserialize, Serialize};

use super::capacity::capacity_interval;
use super::mask::CompactSetMask;
use super::scan::Ratio;
use crate::error::{Error, Result};
use crate::localization::LaurentCoeffs;
use crate::oscillation::Disc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRatios {
    /// Radius `(k+2)δ` of the disc defining `G_j`.
    pub radius: f64,
    pub cap_lower: f64,
    pub cap_upper: f64,
    /// `|c₀| / (ω·cap_lower)`.
    pub c0: Ratio,
    /// `max_s |c₁ˢ| / (ω·δ·cap_lower)`.
    pub c1: Ratio,
}

/// Ratios for one cell whose coefficients were taken about its center.
/// A zero coefficient gives ratio `0`; a nonzero one over an empty `G_j`
/// is infinite.
pub fn coefficient_ratios(coeffs: &LaurentCoeffs, omega: f64, delta: f64, x: &CompactSetMask, k: f64) -> Result<CoefficientRatios> {
    if !(delta > 0.0 && k >= 1.0 && omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta}, k = {k}, omega = {omega}")));
    }
    let radius = (k + 2.0) * delta;
    let (lower, upper) = capacity_interval(&x.region_in_disc(&Disc::new(coeffs.center, radius)?));
    let c0 = coeffs.c0.norm();
    let c1 = coeffs.c1s.0.norm().max(coeffs.c1s.1.norm());
    Ok(CoefficientRatios {
        radius,
        cap_lower: lower,
        cap_upper: upper,
        c0: Ratio::of(c0, omega * lower, c0 == 0.0),
        c1: Ratio::of(c1, omega * delta * lower, c1 == 0.0),
    })
}
