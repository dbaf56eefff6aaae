use thiserror::Error;

/// Errors emitted by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "basis of dimension {dim} needs {required} bytes per dense matrix, \
         exceeding the memory cap of {cap} bytes"
    )]
    BasisTooLarge { dim: usize, required: u128, cap: u64 },

    #[error("site index {site} out of range 1..={sites}")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("matrix is not Hermitian (max |A - A'| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("linear system is singular or the solver stalled: {0}")]
    SingularSystem(String),

    #[error("dimension {dim} exceeds the direct-solve cap {cap}")]
    DirectSolveCap { dim: usize, cap: usize },

    #[error("need at least {needed} levels for spacing statistics, got {got}")]
    TooFewLevels { needed: usize, got: usize },

    #[error("semi-analytic current is defined for U = 0 only (got U = {0})")]
    NonzeroInteraction(f64),

    #[error("negative spacing argument s = {0}")]
    NegativeSpacing(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("check '{name}' failed: {detail}")]
    CheckFailed { name: String, detail: String },

    #[error("linear algebra backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
