use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain where the construction is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a matchgate: entry ({row}, {col}) has magnitude {magnitude:.3e}")]
    NotMatchgate { row: usize, col: usize, magnitude: f64 },

    /// Dense constructions refuse sizes that would not fit in memory.
    #[error("resource limit: {0}")]
    Resource(String),

    /// A check that must hold by construction failed.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    /// Internal failures (as opposed to bad input).
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Consistency(_) | Error::Linalg(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
