//! Crate-wide error type.
//!
//! Variants mirror the failure classes the public contracts promise: shape
//! mismatches, invalid parameters, degenerate numeric inputs, violated
//! invariants, infeasible sampling regions, malformed files, and diverged
//! training runs.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible region: {0}")]
    Infeasible(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("training failed at step {step}: {detail}")]
    Training { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub fn param(detail: impl Into<String>) -> Self {
        Error::Param(detail.into())
    }

    pub fn degenerate(detail: impl Into<String>) -> Self {
        Error::Degenerate(detail.into())
    }

    pub fn empty(detail: impl Into<String>) -> Self {
        Error::Empty(detail.into())
    }

    pub fn contract(detail: impl Into<String>) -> Self {
        Error::Contract(detail.into())
    }

    pub fn infeasible(detail: impl Into<String>) -> Self {
        Error::Infeasible(detail.into())
    }

    pub fn data(detail: impl Into<String>) -> Self {
        Error::Data(detail.into())
    }

    pub fn format(detail: impl Into<String>) -> Self {
        Error::Format(detail.into())
    }

    pub fn training(step: usize, detail: impl Into<String>) -> Self {
        Error::Training { step, detail: detail.into() }
    }
}
