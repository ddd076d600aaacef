use sqg_core::engine::EngineError;
use sqg_core::noise::NoiseError;
use sqg_core::spectral::SpectralError;
use sqg_core::verification::VerifyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("data: {0}")]
    Data(String),
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl CliError {
    /// 1 usage, 2 config, 3 engine, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Engine(_) | CliError::Io(_) | CliError::Data(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}
