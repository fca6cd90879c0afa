use std::path::{Path, PathBuf};

use aglsec_core::CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit codes: 1 usage, 2 data or format, 3 internal invariant.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Format { .. } | CliError::Io { .. } => 2,
            CliError::Core { source, .. } => match source {
                CoreError::InvalidConfig(_) => 1,
                CoreError::Nn(_) | CoreError::Shape(_) => 3,
                _ => 2,
            },
            CliError::Internal(_) => 3,
        }
    }

    pub fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Attaches a context string to core errors.
pub trait CoreContext<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> CoreContext<T> for std::result::Result<T, CoreError> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: context(),
            source,
        })
    }
}
