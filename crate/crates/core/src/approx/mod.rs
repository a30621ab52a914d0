//! Rasterized compact sets, Swiss-cheese generators, capacity intervals of
//! disc-minus-set regions and the oscillation/capacity criterion scanner.

pub mod capacity;
pub mod cheese;
pub mod diagnostics;
pub mod mask;
pub mod scan;
pub mod svg;

pub use capacity::{boundary_curves, boundary_measure, capacity_interval, raster_diameter, POINTS_PER_CURVE};
pub use cheese::make_swiss_cheese;
pub use diagnostics::{coefficient_ratios, CoefficientRatios};
pub use mask::{disc_grid, inner_boundary, CompactSetMask, Construction};
pub use scan::{criterion_scan, CenterSpec, CriterionReport, DiscRecord, RadiusSummary, Ratio, ScanConfig};
