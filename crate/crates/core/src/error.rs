use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("length error: expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
