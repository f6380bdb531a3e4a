use thiserror::Error;

/// Errors produced by the entropy, prediction, loss and training routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("entropy family {0} is not separable")]
    NotSeparable(&'static str),

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("gradient undefined on the boundary of the domain (coordinate {index})")]
    BoundaryGradientUndefined { index: usize },

    #[error("solver mismatch: {0}")]
    SolverMismatch(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        best: Vec<f64>,
        tau: Option<f64>,
        iterations: usize,
        residual: f64,
    },

    #[error("one-hot target required: {0}")]
    OneHotRequired(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite objective at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("margin violated: {0}")]
    MarginViolated(String),

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("index {index} on line {line} outside declared range 0..{bound}")]
    IndexOutOfDeclaredRange {
        line: usize,
        index: usize,
        bound: usize,
    },

    #[error("dataset empty after filtering label-free samples")]
    EmptyAfterFiltering,

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for FyError {
    fn from(e: std::io::Error) -> Self {
        FyError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FyError>;
