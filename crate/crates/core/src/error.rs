use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite {term} during loss evaluation")]
    NonFinite { term: &'static str },

    #[error("training aborted: {0}")]
    Aborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
