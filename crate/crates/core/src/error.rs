use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stale configuration: {0}")]
    StaleConfiguration(String),

    #[error("instance too large for exhaustive search: {what} is {actual}, limit {limit}")]
    SizeLimit {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("non-finite {component} at iteration {iteration}")]
    NonFinite {
        component: &'static str,
        iteration: usize,
    },

    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors raised by reading or decoding external files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
