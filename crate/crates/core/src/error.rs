use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension n = {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is within {tol:e} of the south pole (0, -1), where the inversion is singular")]
    SouthPoleSingularity { tol: f64 },

    #[error("integral did not converge: value {value}, error estimate {error_estimate:e} after {evaluations} evaluations")]
    NotConverged {
        value: f64,
        error_estimate: f64,
        evaluations: u64,
    },

    #[error("radial moment diverges: need p > (m + 1) / 2, got m = {m}, p = {p}")]
    DivergentMoment { m: u32, p: f64 },

    #[error("extrapolated slope is unstable: successive estimates {previous} and {last}")]
    FitUnstable { previous: f64, last: f64 },

    #[error("critical set looks incomplete: {0}")]
    IncompleteCriticalSet(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
