use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value})")]
    NotSpd { pivot: usize, value: f64 },

    #[error("linear system is singular")]
    Singular,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample batch is missing {0}")]
    MissingField(&'static str),

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
