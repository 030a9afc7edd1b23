use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("log is ambiguous at heading {0} (half turn)")]
    LogBranch(f64),
    #[error("invalid link geometry: {0}")]
    InvalidGeometry(String),
    #[error("generalized inertia is not positive definite at shape ({0}, {1})")]
    NotPositiveDefinite(f64, f64),
    #[error("invalid gait: {0}")]
    InvalidGait(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
