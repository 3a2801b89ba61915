use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure in {term}: value {value}")]
    Numerical { term: String, value: f64 },

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("undefined improvement: baseline mean AUC is {0}")]
    UndefinedImprovement(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(term: impl Into<String>, value: f64) -> Self {
        Error::Numerical { term: term.into(), value }
    }
}

/// Fails with [`Error::Numerical`] when `value` is NaN or infinite.
pub(crate) fn ensure_finite(term: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numerical(term, value))
    }
}
