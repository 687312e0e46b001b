use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported semigroup configuration: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The fixed-point iteration ran out of budget. `trace` holds the
    /// per-iteration marginal residuals for diagnosis.
    #[error("Schrödinger system not solved after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("non-finite value in iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("sample at t = {t}: {source}")]
    Sample { t: f64, source: Box<Error> },

    #[error("wrong geometry: {0}")]
    WrongGeometry(String),
}

impl Error {
    /// Strips [`Error::Sample`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
