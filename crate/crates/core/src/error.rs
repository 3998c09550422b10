use thiserror::Error;

use crate::wave::PicardReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid fractional order s = {s}: {reason}")]
    InvalidOrder { s: f64, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("composed operator asymmetry {0:e} exceeds 1e-10")]
    Asymmetric(f64),
    #[error("Jacobi sweeps did not converge: off-diagonal norm {off:e} after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize, off: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalue must be positive, got {0}")]
    NonPositiveEigenvalue(f64),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("non-finite value at time step {step}")]
    Blowup { step: usize },
    #[error("Picard iteration failed after {} iterations (last ratio {:.3})", .0.iterations, .0.last_ratio)]
    PicardFailed(Box<PicardReport>),
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("grid signature mismatch: expected {expected}, found {found}")]
    SignatureMismatch { expected: String, found: String },
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
