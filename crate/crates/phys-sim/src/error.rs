use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample rate {sample_rate} Hz cannot represent content up to {highest} Hz")]
    Aliasing { sample_rate: f64, highest: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
