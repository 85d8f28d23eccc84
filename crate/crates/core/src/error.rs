use thiserror::Error;

/// Errors produced anywhere in the key-rate pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid efficiency response: {0}")]
    InvalidEfficiency(String),

    #[error("detector {detector} is singular")]
    SingularDetector { detector: usize },

    #[error("zero denominator in {quantity}: the state produces no conclusive events")]
    ZeroDenominator { quantity: &'static str },

    #[error("no state satisfies the observed rates (best residual {best_residual:.3e})")]
    Infeasible { best_residual: f64 },

    #[error("solver budget exceeded (best residual {best_residual:.3e})")]
    SolverBudgetExceeded { best_residual: f64 },

    #[error("{name} = {value} is outside its domain")]
    DomainError { name: &'static str, value: f64 },

    #[error("all inputs must be strictly positive")]
    NonPositiveInput,

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("response does not cover the gate: {0}")]
    CoverageError(String),

    #[error("discretized response is non-physical (clipping {clipped:.3e} exceeds 1e-6)")]
    NonPhysical { clipped: f64 },

    #[error("degenerate scenario: both efficiencies vanish at grid index {index}")]
    DegenerateScenario { index: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
