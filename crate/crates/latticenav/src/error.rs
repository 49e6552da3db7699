use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no path between start and goal")]
    NoPath,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("position does not lie on the path")]
    NotOnPath,
    #[error("unknown corridor `{0}`")]
    UnknownCorridor(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
