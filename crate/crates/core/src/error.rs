use std::path::PathBuf;

use thiserror::Error;

/// Failure modes of the library, grouped so the CLI can map them onto exit codes.
#[derive(Debug, Error)]
pub enum LapsvmError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node {0} has no neighbours; the normalized Laplacian is undefined")]
    IsolatedNode(usize),

    #[error("linear system is singular ({0}); consider adding a ridge to the Gram matrix")]
    Singular(String),

    #[error("solver diverged: objective became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("class {0} has no labeled examples")]
    MissingClass(i64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LapsvmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LapsvmError::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LapsvmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LapsvmError::Singular(_) | LapsvmError::Diverged { .. } | LapsvmError::NonFinite(_)
        )
    }

    /// True for failures caused by reading or validating data.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            LapsvmError::Parse { .. }
                | LapsvmError::Io { .. }
                | LapsvmError::MissingClass(_)
                | LapsvmError::Empty(_)
                | LapsvmError::DimensionMismatch { .. }
                | LapsvmError::IsolatedNode(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LapsvmError>;
