use thiserror::Error;

#[derive(Debug, Error)]
pub enum GfdError {
    #[error("parameter {theta} outside domain ({lower}, {upper})")]
    Domain { theta: f64, lower: f64, upper: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("Jacobian kink at {at}")]
    Kink { at: f64 },
    #[error("density underflow: {0}")]
    Underflow(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("density build failed: {0}")]
    Build(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GfdError>;

impl GfdError {
    /// Errors caused by the caller's arguments rather than by the computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            GfdError::Input(_) | GfdError::Unsupported(_) | GfdError::Domain { .. }
        )
    }
}
