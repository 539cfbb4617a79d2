use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero frequency at index {0}")]
    ZeroFrequency(usize),
    #[error("not a prime system: {0}")]
    NotPrime(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("ladder convention mismatch: {0} vs {1}")]
    ConventionMismatch(&'static str, &'static str),
    #[error("cutoff too small: {0}")]
    Cutoff(String),
    #[error("residual above tolerance: {0}")]
    Residual(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("null space has dimension {found}, expected {expected}: {context}")]
    NullSpace { expected: usize, found: usize, context: String },
    #[error("closure violated by pair ({0}, {1})")]
    Closure(String, String),
    #[error("eigenvalue not real: {0}")]
    NonReal(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("invariant drift: {0}")]
    Drift(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
