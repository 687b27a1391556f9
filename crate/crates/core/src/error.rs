use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix `{matrix}` is not symmetric positive definite")]
    NotPositiveDefinite { matrix: String },
    #[error("CFL violated at n = {n}: dt = {dt:.6e}, margin = {margin:.6e}, admissible dt = {max_dt:.6e}")]
    CflViolation {
        n: usize,
        dt: f64,
        margin: f64,
        max_dt: f64,
    },
    #[error("iteration diverged at step {step}")]
    Divergence { step: usize },
    #[error("factorization was built for dt = {built}, requested dt = {requested}")]
    StaleFactorization { built: f64, requested: f64 },
    #[error("no convergence after {iterations} iterations (last estimate {last})")]
    NonConvergence { iterations: usize, last: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
