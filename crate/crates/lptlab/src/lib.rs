//! Numerical laboratory for Lindbladian PT phase transitions.
//!
//! The crate builds GKSL generators for collective-spin and small bosonic
//! models, diagonalizes their superoperators, integrates the mean-field
//! equations and evaluates Gaussian third-quantization results.
//!
//! Conventions used throughout:
//! - dissipator `2 L ρ L† − {L†L, ρ}` (rates folded into the jump operators),
//! - row-major vectorization `|i⟩⟨j| ↦ i·d + j`,
//! - spin bases ordered by descending `m`.

pub mod cli_runner;
pub mod lindblad_engine;
pub mod linalg;
pub mod meanfield_dynamics;
pub mod model_zoo;
pub mod observables;
pub mod sparse;
pub mod spectral_analysis;
pub mod spin_algebra;
pub mod third_quantization;

pub use num_complex::Complex64 as C64;

/// Library error. The CLI maps these onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate zero sector: {count} modes with |λ| below threshold")]
    DegenerateZeroModes { count: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn is_config(&self) -> bool {
        matches!(self, LabError::Config(_) | LabError::InvalidParameter(_))
    }
}

impl From<ndarray_linalg::error::LinalgError> for LabError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        LabError::Numerical(format!("LAPACK: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
