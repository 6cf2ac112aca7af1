use std::path::PathBuf;

use hom_core::HomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] HomError),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 1 for configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Read { .. } | Self::Write { .. } => 1,
            Self::Core(e) => match e {
                HomError::InvalidParameter { .. }
                | HomError::InvalidZernike { .. }
                | HomError::DuplicateZernike { .. }
                | HomError::MaskMismatch(_)
                | HomError::Format { .. }
                | HomError::Io(_) => 1,
                _ => 2,
            },
            Self::Verification(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
