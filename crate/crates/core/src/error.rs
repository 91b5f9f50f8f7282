use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} has no inverse modulo {1}")]
    NoInverse(String, String),

    #[error("invalid modulus: {0}")]
    InvalidModulus(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("degenerate point addition (P = ±Q)")]
    DegenerateAddition,

    /// A recovered value failed its consistency check (e.g. off-curve point).
    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("key generation failed: {0}")]
    KeyGen(String),

    /// Worker refused or could not parse a request.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("verification rejected the worker's results")]
    Rejected,

    #[error("oracle misuse: {0}")]
    Oracle(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
