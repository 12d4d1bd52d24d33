use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order {0}: the walk order N must satisfy N >= 2")]
    InvalidOrder(u32),

    #[error("alpha must be a nonzero finite complex number, got {0}")]
    InvalidAlpha(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: u32 },

    #[error("lattice order mismatch: {left} vs {right}")]
    OrderMismatch { left: u32, right: u32 },

    #[error("{what} exceeds the configured cap of {cap}")]
    CapExceeded { what: String, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical range exceeded: {0}")]
    Range(String),

    #[error("invalid symmetry: {0}")]
    InvalidSymmetry(String),

    #[error("invalid extension: {0}")]
    InvalidExtension(String),

    #[error("invalid boundary datum: {0}")]
    InvalidBoundaryDatum(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by out-of-range numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Range(_) | Error::CapExceeded { .. })
    }

    /// Refusals of a well-formed request that the theory does not cover.
    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::UnsupportedCombination(_) | Error::Unsupported(_))
    }
}
