use thiserror::Error;

/// Errors raised by discretization, kernel algebra and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coercivity violation: a0 lower bound {a_min} is not positive")]
    CoercivityViolation { a_min: f64 },

    #[error("coefficient field out of its declared bounds: a({x}) = {value} not in [{a_min}, {a_max}]")]
    CoefficientOutOfBounds {
        x: f64,
        value: f64,
        a_min: f64,
        a_max: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("unsupported kernel variant for {operation}: {variant}")]
    UnsupportedVariant {
        operation: &'static str,
        variant: String,
    },

    #[error("atom at delay {tau} is not aligned with the time grid (nearest grid time {nearest})")]
    MisalignedAtom { tau: f64, nearest: f64 },

    #[error("insufficient samples: need index {needed}, series covers [{first}, {last}]")]
    InsufficientHistory {
        needed: isize,
        first: isize,
        last: isize,
    },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("history does not match the initial value at t = 0 (max mismatch {mismatch:e})")]
    HistoryMismatch { mismatch: f64 },

    #[error("no admissible subinterval width: a single cell already gives contraction factor {q}")]
    NoAdmissibleDelta { q: f64 },

    #[error("fixed-point iteration diverged on subinterval {subinterval} after {iterations} iterations")]
    IterationDivergence {
        subinterval: usize,
        iterations: usize,
    },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("time grid does not resolve the mollification width: {0}")]
    Resolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
