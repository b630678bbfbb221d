//! Crate-wide error type, grouped by the process exit code each class maps to.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad field values, unknown keys, inconsistent options.
    #[error("config error: {0}")]
    Config(String),

    /// Data problems: unreadable or malformed files, shape mismatches, bad labels.
    #[error("data error: {0}")]
    Data(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl Error {
    /// Exit code for the CLI: 1 config error, 2 data error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) => 2,
            Error::NonFiniteLoss { .. } => 3,
        }
    }
}

// File-system failures surface while reading datasets or writing reports;
// both are data errors for exit-code purposes.
impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(format!("io: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
