use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("site index {index} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { index: usize, n_sites: usize },

    #[error("duplicate site index {0} in Pauli string")]
    DuplicateSite(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("operator is not hermitian")]
    NotHermitian,

    #[error("eigensolver did not converge: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    NoConvergence { residual: f64, tolerance: f64 },

    #[error("vacuum preparation failed: |<M>| = {magnetization:.4} is below {threshold:.4}")]
    AmbiguousMagnetization { magnetization: f64, threshold: f64 },

    #[error("integrator failed at t = {time}: local error estimate {estimate:.3e}")]
    Integrator { time: f64, estimate: f64 },

    #[error("Krylov dimension cap {cap} exceeded (error estimate {estimate:.3e})")]
    KrylovCapExceeded { cap: usize, estimate: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("record too short: {0}")]
    RecordTooShort(String),

    #[error("probe band is empty")]
    EmptyBand,

    #[error("spectrum is identically zero")]
    ZeroSpectrum,

    #[error("too few samples: {found} (need at least {needed})")]
    TooFewSamples { found: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::AmbiguousMagnetization { .. }
                | Error::Integrator { .. }
                | Error::KrylovCapExceeded { .. }
                | Error::RecordTooShort(_)
                | Error::EmptyBand
                | Error::ZeroSpectrum
                | Error::TooFewSamples { .. }
                | Error::NotNormalized(_)
        )
    }
}
