use thiserror::Error;

use dsp_chain::DspError;
use phys_sim::SimError;
use postproc::PostprocError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit code: 2 for configuration and I/O problems, 3 for
    /// numerical failures, 4 for infeasible requests.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<ratecalc_lca::Error> for CliError {
    fn from(e: ratecalc_lca::Error) -> Self {
        use ratecalc_lca::Error as E;
        match e {
            E::InvalidParameter(_) => CliError::Config(e.to_string()),
            E::Infeasible(_) => CliError::Infeasible(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(io) => CliError::Io(io),
            SimError::InvalidParameter(_) | SimError::Aliasing { .. } | SimError::Format(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::Sim(s) => s.into(),
            DspError::Io(io) => CliError::Io(io),
            DspError::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<PostprocError> for CliError {
    fn from(e: PostprocError) -> Self {
        match e {
            PostprocError::Io(io) => CliError::Io(io),
            PostprocError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            PostprocError::InvalidParameter(_) | PostprocError::Parse(_) | PostprocError::Format(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
