use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("no scenarios to evaluate")]
    NoScenarios,
    #[error(transparent)]
    Core(#[from] cobev_core::Error),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("image encoding: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
