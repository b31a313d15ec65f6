use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing input {path} (run `{stage}` first)")]
    MissingInput { stage: &'static str, path: PathBuf },

    #[error("member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: cattr_core::Error,
    },

    #[error(transparent)]
    Core(#[from] cattr_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 1 for anything rejected before work starts, 2 for failures while
    /// running.
    pub fn exit_code(&self) -> i32 {
        use cattr_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::MissingInput { .. } => 1,
            HarnessError::Core(E::InvalidConfig(_) | E::UnknownTap { .. }) => 1,
            _ => 2,
        }
    }

    pub(crate) fn member(member: usize) -> impl FnOnce(cattr_core::Error) -> Self {
        move |source| HarnessError::Member { member, source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| HarnessError::Io {
            path: path.into(),
            source,
        })
    }
}
