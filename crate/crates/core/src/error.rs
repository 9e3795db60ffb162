use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at token {token:?}: {reason}")]
    Parse { token: String, reason: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dominance table for n = {n} needs {required_bytes} bytes (cap allows n <= {cap})")]
    Resource {
        n: usize,
        required_bytes: u64,
        cap: usize,
    },

    #[error("density undefined on an empty set")]
    EmptySet,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("refinement exhausted: {0}")]
    RefinementExhausted(String),

    #[error("size guard: {0}")]
    Guard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
