use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value {value:e} outside attainable range [{lo:e}, {hi:e}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("condition failed: {0}")]
    ConditionFailed(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed spec at line {line}, column {column}: {msg}")]
    Spec { line: usize, column: usize, msg: String },
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn from_json(e: &serde_json::Error) -> Self {
        Error::Spec {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}
