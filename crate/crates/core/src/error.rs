use std::io;

use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    Singular { jitter: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("rejection sampling accepted {accepted} of {drawn} draws")]
    RejectionBudget { accepted: usize, drawn: usize },

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        LabError::Dimension(msg.into())
    }

    /// True for failures that come from the numerics rather than from
    /// the caller's input or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::Domain { .. }
                | LabError::Singular { .. }
                | LabError::Divergence { .. }
                | LabError::RejectionBudget { .. }
        )
    }
}
