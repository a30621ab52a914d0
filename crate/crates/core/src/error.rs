use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not elliptic: characteristic root {0} is real")]
    NotElliptic(String),
    #[error("operator has all coefficients equal to zero")]
    DegenerateOperator,
    #[error("kernel evaluated at its singular point z = 0")]
    SingularPoint,
    #[error("k1 calibration failed: bump pairings disagree (relative gap {0:.3e})")]
    CalibrationFailed(f64),
    #[error("grid too small: need at least {need} samples per axis, got {nx}x{ny}")]
    GridTooSmall { need: usize, nx: usize, ny: usize },
    #[error("disc (center {center}, radius {radius}) does not fit inside the sampling grid")]
    DiscOutsideGrid { center: String, radius: f64 },
    #[error("quadrature under-resolved: doubling the boundary rule changed the result by {0:.3e} (relative)")]
    QuadratureUnderresolved(f64),
    #[error("gradient fields are required but missing")]
    MissingGradients,
    #[error("measure has zero total mass")]
    ZeroMeasure,
    #[error("linear map is singular (det = {0:.3e})")]
    SingularMap(f64),
    #[error("box too small for the partition: side {side} < 4 * delta = {min}")]
    BoxTooSmall { side: f64, min: f64 },
    #[error("bump is nonzero on or beyond its support circle (max |phi| = {0:.3e})")]
    SupportLeak(f64),
    #[error("partition does not cover the support of Lf (gap at {0})")]
    CoverageGap(String),
    #[error("evaluation annulus inner radius {inner} is inside k4 * r = {limit}")]
    AnnulusInsideSupport { inner: f64, limit: f64 },
    #[error("hole placement failed after {0} retries")]
    PlacementFailed(usize),
    #[error("raster resolution too coarse: spacing {spacing} > r_min / 32 = {limit}")]
    ResolutionTooCoarse { spacing: f64, limit: f64 },
    #[error("grid shapes do not match")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for malformed input or filesystem problems, as opposed to
    /// mathematical domain errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Format(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
