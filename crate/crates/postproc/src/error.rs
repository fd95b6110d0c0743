use thiserror::Error;

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse degree distribution: {0}")]
    Parse(String),
    #[error("inconsistent ensemble: {0}")]
    Ensemble(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("density evolution: {0}")]
    DensityEvolution(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, PostprocError>;
