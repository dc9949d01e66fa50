use thiserror::Error;

use crate::group::GroupSpec;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the chart domain: {0}")]
    Domain(String),

    #[error("group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: GroupSpec, found: GroupSpec },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label band exhausted: {0}")]
    BandExhausted(String),

    #[error("codomain band too small (would alias): need cutoff {required}")]
    InsufficientCodomain { required: String },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operator is not elliptic: {0}")]
    NotElliptic(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cache entry {name}: {reason}")]
    Cache { name: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_group(expected: GroupSpec, found: GroupSpec) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::GroupMismatch { expected, found })
    }
}
