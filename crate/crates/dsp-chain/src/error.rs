use phys_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no pilot found: peak prominence {prominence_db:.1} dB")]
    NoPilot { prominence_db: f64 },
    #[error("pilot dropout: {run} consecutive samples below threshold")]
    PilotDropout { run: usize },
    #[error("LMS diverged: {0}")]
    Divergence(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T> = std::result::Result<T, DspError>;
