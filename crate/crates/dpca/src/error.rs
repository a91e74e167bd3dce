use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("matrix not symmetric (max asymmetry {max_dev:.3e} exceeds tolerance {tol:.3e})")]
    NotSymmetric { max_dev: f64, tol: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps (off-norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("matrix not invertible: min eigenvalue {min_eig:.3e} <= floor {floor:.3e}")]
    NotInvertible { min_eig: f64, floor: f64 },
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate cancellation in aggregation (mean norm {0:.3e})")]
    Cancellation(f64),
    #[error("inner solver stalled after {iters} iterations (gradient norm {grad_norm:.3e})")]
    SolverStall { iters: usize, grad_norm: f64 },
    #[error("numerical failure in shift-and-invert: {0}")]
    NumericalFailure(String),
    #[error("shift too small: preconditioner is not positive definite")]
    ShiftTooSmall,
    #[error("resource budget exceeded: {0}")]
    ResourceBudget(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
