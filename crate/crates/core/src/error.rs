use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible sampling request: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("payload size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("step sizes violate tau*sigma*|K|^2 <= 1 (tau={tau}, sigma={sigma}, |K|={norm})")]
    StepSize { tau: f64, sigma: f64, norm: f64 },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures raised inside an iterative solver.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::StepSize { .. } | Error::Divergence(_) | Error::Svd(_)
        )
    }
}
