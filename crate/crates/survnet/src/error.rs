use std::path::{Path, PathBuf};

use survnet_core::{DataError, NnError, SurvivalError, TrainError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("numeric abort: {0}")]
    Numeric(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Check(_) => 5,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl std::fmt::Display) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NumericAbort { .. } => Error::Numeric(e.to_string()),
            TrainError::Nn(NnError::NonFinite { .. }) => Error::Numeric(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<DataError> for Error {
    fn from(e: DataError) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<NnError> for Error {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite { .. } => Error::Numeric(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<SurvivalError> for Error {
    fn from(e: SurvivalError) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
