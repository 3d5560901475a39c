use thiserror::Error;

/// Errors raised by the update kernels, oracles and instance machinery.
///
/// Algorithm runs report most numerical breakdowns as a trace
/// [`Outcome`](crate::trace::Outcome) instead; these variants surface from the
/// single-step primitives and from configuration or I/O problems.
#[derive(Debug, Error)]
pub enum RescaleError {
    #[error("direction norm {norm:e} is below the floor {floor:e}")]
    DegenerateDirection { norm: f64, floor: f64 },
    #[error("dilation constant must exceed 1, got {0}")]
    InvalidDilation(f64),
    #[error("curvature s^T y = {curvature:e} is not safely positive")]
    CurvatureViolation { curvature: f64 },
    #[error("s^T g = {0:e} is not negative")]
    NonDescentDirection(f64),
    #[error("curvature scalar beta = {0:e} is below the floor")]
    DegenerateCurvature(f64),
    #[error("gradient norm {0:e} is below the floor")]
    DegenerateGradient(f64),
    #[error("direction norm {0:e} is too small to normalize")]
    ZeroDirection(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("dimension {0} is not supported here")]
    InvalidDimension(usize),
    #[error("optimum oracles disagree: lower {lower}, upper {upper}")]
    OracleDisagreement { lower: f64, upper: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RescaleError {
    /// Breakdowns of the curvature condition that runs report as an outcome.
    pub fn is_curvature(&self) -> bool {
        matches!(
            self,
            RescaleError::CurvatureViolation { .. } | RescaleError::DegenerateCurvature(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, RescaleError>;
