use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unresolved ties for tweets: {}", .0.join(", "))]
    UnresolvedTies(Vec<String>),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("non-finite value during training at epoch {epoch}: {what}")]
    Numeric { epoch: usize, what: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("feature space mismatch: model expects {expected}, got {found}")]
    SpaceMismatch { expected: String, found: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the failure stems from bad input rather than a defect in the
    /// workbench itself. The CLI maps this to exit code 1 (else 2).
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Numeric { .. })
    }
}
