use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps [`Error::is_validation`] errors to exit code 2 and everything
/// else to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("near-resonant denominator: {0}")]
    NearResonance(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("gate cache miss for {0}; calibrate the gate set first")]
    CacheMiss(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Index(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
