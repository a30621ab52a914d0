//! Numerical core for C¹-approximation by solutions of planar second-order
//! elliptic equations with constant complex coefficients.
//!
//! The crate is organised by subsystem:
//!
//! * [`elliptic`]: the operator, its characteristic roots, canonical
//!   coordinates, fundamental solution and derivative kernels.
//! * [`grid`]: uniformly sampled complex functions and their JSON form.
//! * [`oscillation`]: L-oscillation of a function over a disc.
//! * [`menger`]: Menger curvature, curvature energy and capacity lower bounds.
//! * [`localization`]: partitions of unity, Vitushkin localization, Laurent
//!   coefficients and far-field decay fits.
//! * [`approx`]: rasterized compact sets and the oscillation/capacity scanner.

pub mod approx;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod localization;
pub mod menger;
pub mod oscillation;
pub mod summation;

pub use num_complex::Complex64 as C64;

pub use approx::{
    capacity_interval, coefficient_ratios, criterion_scan, inner_boundary, make_swiss_cheese, CenterSpec,
    CompactSetMask, CoefficientRatios, CriterionReport, DiscRecord, Ratio, ScanConfig,
};
pub use elliptic::{CanonicalCoords, EllipticOperator, Stencil};
pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
pub use localization::{
    build_partition, c0_by_parts, farfield_decay_check, laurent_coeffs, localized_pieces,
    mollifier, vitushkin_localize, AnnulusSpec, DecayReport, LaurentCoeffs, LocalizedPieces,
    PartitionOfUnity, PointSource, RootCase,
};
pub use menger::{
    capacity_lower_bound, curvature_energy, growth_profile, menger_curvature,
    pushforward_linear, DiscreteMeasure, GrowthProfile,
};
pub use oscillation::{
    l_oscillation, modulus_of_continuity, oscillation_via_psi, psi_weight, Disc,
};

/// Number of worker threads requested through `ECAP_THREADS`, if set.
pub fn env_threads() -> Option<usize> {
    std::env::var("ECAP_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// Runs `f` on a dedicated rayon pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}
