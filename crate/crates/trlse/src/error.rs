use std::path::PathBuf;

/// Errors produced by the level-set estimation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The Gram matrix could not be factorized even at the largest jitter.
    #[error("gram matrix singular after jitter escalation (condition estimate {condition:.3e})")]
    SingularGram { condition: f64 },

    /// A joint covariance produced non-finite entries.
    #[error("covariance matrix is not positive semi-definite")]
    NotPsd,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Complement sampling found zero points outside the excluded boxes.
    #[error("no feasible candidate outside the excluded boxes after rejection budget")]
    NoFeasibleCandidate,

    /// Acquisition kinds that are registered as plugin slots but have no
    /// formula in this crate.
    #[error("acquisition kind `{0}` is registered but not implemented")]
    UnsupportedAcquisition(&'static str),

    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
