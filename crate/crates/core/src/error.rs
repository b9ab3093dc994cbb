use thiserror::Error;

/// Errors raised by the estimation, diagnostics and ingestion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("differencing order {order} leaves no observations from a series of length {len}")]
    DegenerateLength { order: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("degenerate likelihood at lambda = {lambda}")]
    DegenerateLikelihood { lambda: f64 },

    #[error("covariance matrix is not positive definite: {0}")]
    Conditioning(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sub-sample windows too short: window of {window} levels, need at least {required}")]
    WindowsTooShort { window: usize, required: usize },

    #[error("undefined MASE scale: training series has no variation")]
    UndefinedScale,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
