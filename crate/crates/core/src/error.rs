use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss while perturbing parameter {index}")]
    NonFiniteLoss { index: usize },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("model has no gated layer")]
    NoGatedLayer,

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn shape_err<T>(
    op: &'static str,
    left: (usize, usize),
    right: (usize, usize),
) -> Result<T> {
    Err(Error::ShapeMismatch { op, left, right })
}
