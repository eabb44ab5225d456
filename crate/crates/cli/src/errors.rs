//! CLI error taxonomy with stable exit codes.

use std::fmt;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, inconsistent options, unreadable configuration.
    Config(String),
    /// Unusable input data.
    Data(String),
    /// An estimation or numerical routine failed.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        };
        write!(f, "error[{}]: {}", self.kind(), msg)
    }
}

impl std::error::Error for CliError {}

impl From<simfex_core::Error> for CliError {
    fn from(e: simfex_core::Error) -> Self {
        use simfex_core::Error as E;
        match &e {
            E::Domain(_) | E::InvalidInput(_) | E::EmptyCategory { .. } => {
                CliError::Data(e.to_string())
            }
            E::Estimation(_) | E::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o failure: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
