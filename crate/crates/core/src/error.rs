use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: dimension {dim} expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        dim: usize,
        expected: usize,
        got: usize,
    },

    #[error("unknown tap `{tap}`; valid taps: {}", valid.join(", "))]
    UnknownTap { tap: String, valid: Vec<String> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("kernel for ensemble member {member} is singular even after ridge")]
    SingularKernel { member: usize },

    #[error("projection mismatch: featurized with seed {expected}, scoring with seed {got}")]
    ProjectionMismatch { expected: u64, got: u64 },

    #[error("matrix is not orthogonal (max |UᵀU - I| = {max_dev:e})")]
    NotOrthogonal { max_dev: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bad container at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, dim: usize, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            dim,
            expected,
            got,
        })
    }
}
