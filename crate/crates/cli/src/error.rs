use thiserror::Error;

/// Failures surfaced by the command-line tool, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or conflicting flags. Exit code 1.
    #[error("usage: {0}")]
    Usage(String),
    /// Input data that fails validation. Exit code 2.
    #[error("invalid data: {0}")]
    Data(String),
    /// Anything that goes wrong after the inputs were accepted. Exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<pdsir_core::Error> for CliError {
    fn from(e: pdsir_core::Error) -> Self {
        use pdsir_core::Error as E;
        match e {
            E::InvalidData(_) | E::InvalidGrid(_) | E::InvalidPath(_) => CliError::Data(e.to_string()),
            E::InvalidParams(_) | E::InvalidConfig(_) => CliError::Usage(e.to_string()),
            E::DegenerateInitialisation { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
