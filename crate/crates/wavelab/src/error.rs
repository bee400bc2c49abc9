//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("coefficients are not Hermitian-symmetric (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("multiplier `{label}` is singular at wavenumber {mode:?} with no declared limit")]
    SingularSymbol { label: String, mode: [i64; 3] },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-conditioned request: {0}")]
    IllConditioned(String),

    #[error("degenerate fit window: {0}")]
    DegenerateFit(String),

    #[error("blowup guard tripped at step {step} (t = {t:.6}): energy jump {jump:.3e}")]
    Blowup { step: usize, t: f64, jump: f64 },

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
