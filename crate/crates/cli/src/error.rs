use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or configuration (exit 1).
    Usage(String),
    /// Unreadable, corrupt or mismatched data and model files (exit 2).
    Data(String),
    /// A check ran but its verdict was negative (exit 3).
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Gate(_) => 3,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage-error",
            CliError::Data(_) => "data-error",
            CliError::Gate(_) => "gate-failed",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Gate(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<msapdm::Error> for CliError {
    fn from(e: msapdm::Error) -> Self {
        match e {
            msapdm::Error::InvalidConfig { .. } | msapdm::Error::NotDivisible { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
