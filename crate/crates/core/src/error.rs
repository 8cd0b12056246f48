use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter outside a lemma's stated range, or a malformed request.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("orthonormalization residual {residual:e} at grade {grade} exceeds {limit:e}")]
    Conditioning {
        grade: usize,
        residual: f64,
        limit: f64,
    },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error(
        "bisection bracket invalid: min eigenvalue {lo_eig:e} at c = {c_lo} (must pass), \
         {hi_eig:e} at c = {c_hi} (must fail)"
    )]
    Bracket {
        c_lo: f64,
        c_hi: f64,
        lo_eig: f64,
        hi_eig: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
