use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow in {what}; about {required_bits} precision bits required")]
    Overflow { what: String, required_bits: u64 },

    #[error("divergent series requested without termination: {0}")]
    FormalSeries(String),

    #[error("no convergence after {terms} terms: {what}")]
    NoConvergence { what: String, terms: usize },

    #[error("truncation bound {bound:e} not reached within {max_terms} terms")]
    Truncation { bound: f64, max_terms: usize },

    #[error("unstable recursion at lattice index {index}: relative change {change:e}")]
    Instability { index: i64, change: f64 },

    #[error("degenerate root near x = {x}: denominator vanishes")]
    DegenerateRoot { x: f64 },

    #[error("{identity} violated at ({row}, {col}): residual {residual:e} exceeds {bound:e}")]
    AlgebraViolation {
        identity: String,
        row: usize,
        col: usize,
        residual: f64,
        bound: f64,
    },

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type QResult<T> = Result<T, QError>;
