use thiserror::Error;

/// Errors raised by the model library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the support of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine stalled before reaching its tolerance.
    #[error("{routine} failed to converge after {iterations} iterations")]
    Convergence { routine: &'static str, iterations: usize },

    /// A numerical quantity became degenerate (singular matrix, vanishing variance, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// ARMA coefficients violate stationarity or invertibility.
    #[error("inadmissible ARMA coefficients: {0}")]
    Inadmissible(String),

    #[error("invalid model specification: {0}")]
    Spec(String),

    /// A named covariate column is not available.
    #[error("missing covariate column `{0}`")]
    MissingColumn(String),

    #[error("invalid data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
