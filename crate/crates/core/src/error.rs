use thiserror::Error;

/// Errors produced by the phase-space toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {message} (achieved {achieved:e})")]
    Numerical { message: String, achieved: f64 },

    #[error("degenerate state: norm {norm:e} is below 1e-12")]
    DegenerateState { norm: f64 },

    #[error("degenerate indicator: denominator {0:e} is below 1e-12")]
    DegenerateIndicator(f64),

    #[error("unsupported state: {0}")]
    Unsupported(String),

    #[error(
        "grid does not cover the state: total integral {integral} differs from 1 by more than 1e-3"
    )]
    SupportCoverage { integral: f64 },

    #[error("non-finite value {value} at grid index {index}")]
    NonFinite { value: f64, index: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error(
        "resource limit: {points} grid points exceed the budget of {budget}; use a coarser grid"
    )]
    ResourceLimit { points: u128, budget: u128 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
