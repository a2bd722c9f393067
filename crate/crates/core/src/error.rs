use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature order {0} out of range [1, 500]")]
    QuadratureOrder(usize),

    #[error("quadrature did not converge for {what}: {coarse:e} vs {fine:e}")]
    QuadratureNonConvergence {
        what: &'static str,
        coarse: f64,
        fine: f64,
    },

    #[error("overflow evaluating {what} (log value {log_value})")]
    Overflow { what: &'static str, log_value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Unsupported(String),

    #[error("dimension {dim} too large for {what} (max {max})")]
    DimensionTooLarge {
        what: &'static str,
        dim: usize,
        max: usize,
    },

    #[error("insufficient trials: {got} < {min}")]
    InsufficientTrials { got: usize, min: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
