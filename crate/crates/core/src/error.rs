use thiserror::Error;

/// Errors produced by the simulation, reconstruction and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state outside the supported family: {0}")]
    UnsupportedState(String),

    #[error(
        "ill-conditioned datum {index}: probability {probability:e} under the current estimate"
    )]
    IllConditionedDatum { index: usize, probability: f64 },

    #[error("ill-posed fit: {0}")]
    IllPosedFit(String),

    #[error("data format error at line {line}: {message}")]
    DataFormat { line: u64, message: String },

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
