use thiserror::Error;

/// Errors raised by the reduction pipeline and its helpers.
#[derive(Debug, Error)]
pub enum HessError {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("structure violation at ({i}, {j}): magnitude {mag:e}")]
    Structure { i: usize, j: usize, mag: f64 },
    #[error("kind mismatch: {0}")]
    Kind(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("structure integrity breach at step {step}, entry ({i}, {j}): magnitude {mag:e}")]
    Integrity {
        step: usize,
        i: usize,
        j: usize,
        mag: f64,
    },
    #[error("malformed index pattern: {0}")]
    Pattern(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HessError>;
