use thiserror::Error;

/// Errors raised by the key-rate and noise-budget calculators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("Fock cutoff {cutoff} too small: truncated norm deficit {deficit:.3e}")]
    CutoffTooSmall { cutoff: usize, deficit: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no root: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
