use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("viewer absent: actor {actor} missing from frame {frame}")]
    ViewerAbsent { actor: u32, frame: usize },

    #[error("grid specs do not match")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("insufficient history: need at least {needed} frames, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("augmentation infeasible after {attempts} placements")]
    AugmentationInfeasible { attempts: usize },

    #[error("track file: {0}")]
    Track(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
