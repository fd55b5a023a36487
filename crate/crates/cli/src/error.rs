use thiserror::Error;

use regkit::error::RegError;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for malformed input: bad scenario, bad flag, unreadable file.
pub const EXIT_INPUT: i32 = 1;
/// Exit code for a failed identity, implication or suite check.
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Reg(#[from] RegError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Report(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("{0}")]
    Usage(String),

    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
