use std::fmt;
use std::process::ExitCode;

use mvbridge::BridgeError;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Io(_) => 3,
            Self::Numerical(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Io(m) => write!(f, "I/O error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<BridgeError> for CliError {
    fn from(e: BridgeError) -> Self {
        let m = e.to_string();
        match e {
            BridgeError::Io(_)
            | BridgeError::Json(_)
            | BridgeError::Parse { .. }
            | BridgeError::UnknownDay { .. }
            | BridgeError::NonMonotone { .. } => Self::Io(m),
            BridgeError::InvalidModel(_)
            | BridgeError::Config(_)
            | BridgeError::WeightSum { .. }
            | BridgeError::TimeNotOnGrid(_) => Self::Usage(m),
            _ => Self::Numerical(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
