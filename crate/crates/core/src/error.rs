use thiserror::Error;

/// Errors produced by the radial discretization, functionals and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("truncation: scaling by t = {t} drops a mass fraction {lost:.3e} past r_max")]
    Truncation { t: f64, lost: f64 },
    #[error("classification error: {0}")]
    Classification(String),
    #[error("degenerate descent: {0}")]
    DegenerateDescent(String),
    #[error("mountain-pass geometry failure: {0}")]
    Geometry(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SpsError>;
