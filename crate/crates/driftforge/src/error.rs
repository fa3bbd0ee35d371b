//! Crate-wide error type. Every fallible public operation returns
//! [`Result`]; panics are reserved for internal logic bugs.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("poisoning requires at least one sample with label != {target_label}")]
    NoEligibleSamples { target_label: usize },

    #[error("requested {requested} poison samples but only {eligible} are eligible")]
    NotEnoughEligible { requested: usize, eligible: usize },

    #[error("bad magic in {path}: expected {expected:#010x}, got {got:#010x}")]
    IdxBadMagic {
        path: String,
        expected: u32,
        got: u32,
    },

    #[error("{path}: file truncated, needed {needed} more bytes")]
    IdxTruncated { path: String, needed: usize },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: String, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
