use friedrichs_core::Error as CoreError;
use thiserror::Error;

/// Failures of a run, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownSystem { .. } | CoreError::InvalidInput(_) | CoreError::Unsupported(_) => {
                CliError::Config(e.to_string())
            }
            CoreError::Validation(msg) => CliError::Validation(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
