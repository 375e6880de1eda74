use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("need at least 2 samples to centre the data, got {n}")]
    TooFewSamples { n: usize },

    #[error("OU marginal is only a density for t > 0 (got t = {t})")]
    NonPositiveTime { t: f64 },

    #[error("reference covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("covariance has eigenvalue {min_eigenvalue} below the PSD tolerance")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("coordinate {index} of the original set has zero variance; bandwidth undefined")]
    DegenerateCoordinate { index: usize },

    #[error("sample set is empty")]
    EmptySet,

    #[error("unsupported {what} index {index}")]
    UnsupportedIndex { what: &'static str, index: String },

    #[error("alpha = {alpha} is within 1e-4 of the pole at alpha = 1")]
    NearPole { alpha: f64 },

    #[error("resolvent is singular: ridge_hat = 0 with n <= d")]
    SingularResolvent,

    #[error("step {t} outside 1..={s}")]
    StepOutOfRange { t: usize, s: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { field, reason: reason.into() }
    }

    /// True when the error stems from bad input rather than a runtime fault.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Csv(_) | Error::ThreadPool(_))
    }
}
