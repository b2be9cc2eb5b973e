use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid side length must be at least 1")]
    EmptyGrid,

    #[error("block index {t} out of range 1..={h}")]
    BlockOutOfRange { t: usize, h: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("token id {id} outside codebook of size {k}")]
    InvalidToken { id: u32, k: usize },

    #[error("class id {class} invalid for {n_classes} classes")]
    InvalidClass { class: usize, n_classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("logit row has no finite entries")]
    NoFiniteLogits,

    #[error("decode state at step {state} cannot accept step {requested}")]
    StepMismatch { state: usize, requested: usize },

    #[error("empty token region")]
    EmptyRegion,

    #[error("invalid bounding box: {0}")]
    InvalidBBox(String),

    #[error("{0} is not a perfect square")]
    NotSquare(u64),

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
