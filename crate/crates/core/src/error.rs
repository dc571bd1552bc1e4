use thiserror::Error;

/// Errors raised by metric evaluation, loop construction and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate metric sample at ({x}, {y})")]
    DegenerateMetric { x: f64, y: f64 },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("null class has no loop representative")]
    NullClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "no start converged for class ({p}, {q}); best gradient sup-norm {best_grad:.3e} after {iterations} iterations"
    )]
    NotConverged {
        p: i64,
        q: i64,
        best_grad: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
