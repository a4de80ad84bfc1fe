use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix of size {size} not factorizable even with jitter {max_jitter:e}")]
    Factorization { size: usize, max_jitter: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("quadrature not converged: |coarse - fine| = {diff:e} > tolerance {tol:e}")]
    QuadratureNotConverged { diff: f64, tol: f64 },

    #[error("importance weights degenerate: effective sample size {ess:.1} < 100")]
    DegenerateWeights { ess: f64 },

    #[error("selection infeasible: even full activation gives mse {full_mse} >= qos {qos_var}")]
    Infeasible { full_mse: f64, qos_var: f64 },

    #[error("exhaustive search over {n} sensors exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("duplicate sensor id {0:?}")]
    DuplicateId(String),
}
