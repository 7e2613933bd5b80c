use thiserror::Error;

/// Errors raised by the numerical and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrability error: {0}")]
    Integrability(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("calibration failure: {0}")]
    Calibration(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
