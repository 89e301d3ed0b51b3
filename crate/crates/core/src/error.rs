use thiserror::Error;

use crate::coeff::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical core.
///
/// Failing *bounds* are not errors: estimate checks report a negative margin
/// instead of returning `Err`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent {0}: must be >= 1 or infinity")]
    InvalidExponent(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time {time} is not a node of the time grid")]
    OffGrid { time: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Expr(#[from] ExprError),

    /// A parameter point breaks one of the standing assumptions DA1..DA5.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("picard iteration did not converge after {iterations} iterations (last d_mu = {last:e})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("non-contraction detected at mu = {mu}: ratios {ratios:?}")]
    NonContraction { mu: f64, ratios: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    pub(crate) fn assumption(assumption: &'static str, detail: impl Into<String>) -> Self {
        Error::Assumption {
            assumption,
            detail: detail.into(),
        }
    }
}
