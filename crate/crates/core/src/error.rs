use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cocycle condition fails at ({0}, {1}, {2}), residual {3:e}")]
    Cocycle(usize, usize, usize, f64),
    #[error("grading mismatch at pair ({0}, {1}) into fiber index {2}")]
    Grading(usize, usize, usize),
    #[error("point leaves the chart: {0}")]
    ChartExit(String),
    #[error("not liftable at tolerance {tol:e}: probe {witness} has defect {defect:e}")]
    NotLiftable { tol: f64, witness: usize, defect: f64 },
    #[error("degenerate symplectic form: {0}")]
    Degenerate(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
