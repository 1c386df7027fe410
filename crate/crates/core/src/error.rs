use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense problem too large: {size} > {limit}")]
    DenseGuard { size: usize, limit: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("oracle did not converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    OracleStalled { grad_norm: f64, iterations: usize },

    #[error("non-finite iterate at agent {agent}, iteration {iteration}")]
    NonFinite { agent: usize, iteration: usize },

    #[error("diverged at iteration {iteration}: relative error {error:e}")]
    Diverged { iteration: usize, error: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Factorization(_)
                | Error::OracleStalled { .. }
                | Error::NonFinite { .. }
                | Error::Diverged { .. }
        )
    }
}
