use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must have full column rank does not (within the
    /// configured pivot-ratio threshold).
    #[error("rank deficient {context}: pivot ratio {ratio:.3e} below {threshold:.1e}")]
    Rank {
        context: &'static str,
        ratio: f64,
        threshold: f64,
    },

    #[error("dimension mismatch in {context}: {detail}")]
    Dimension {
        context: &'static str,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input violates a documented precondition (e.g. a covariance that
    /// is not Hermitian).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed configuration or results text.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("write failed: {0}")]
    Write(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn is_rank(&self) -> bool {
        matches!(self, Error::Rank { .. })
    }
}
