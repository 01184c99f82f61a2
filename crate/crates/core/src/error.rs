use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// Exact enumeration was requested for a dimension above the hard cap.
    #[error("enumeration budget exceeded: n = {n}, limit is {limit}")]
    Budget { n: usize, limit: usize },

    #[error("no overlap samples recorded at t = {0}")]
    MissingData(usize),

    #[error("quadrature did not reach tolerance: error estimate {estimate:e} after {evaluations} evaluations")]
    Quadrature { estimate: f64, evaluations: usize },

    /// A numerical check that is expected to hold failed; carries a description of the offending point.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
