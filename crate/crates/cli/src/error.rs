use qpc_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// Missing or unreadable upstream artifacts.
    #[error("input error: {0}")]
    Input(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 2 for inputs that validate but violate a hypothesis, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::Infeasible(_))
            | CliError::Core(CoreError::ScheduleInfeasible { .. })
            | CliError::Core(CoreError::ParameterSearch { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
