use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("solver produced a non-finite iterate at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("degenerate portfolio: the entries of Ω̂μ̂ sum to zero")]
    DegeneratePortfolio,

    #[error("rate is undefined: {0}")]
    UndefinedRate(&'static str),

    #[error("every fit on the grid failed: {}", .0.join("; "))]
    AllFitsFailed(Vec<String>),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical method itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. } | Error::Diverged { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
