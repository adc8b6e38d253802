use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal has zero energy")]
    ZeroEnergy,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("signal not decayed at the window boundary: edge/peak ratio {ratio:.3e} exceeds {tolerance:.1e}")]
    BoundaryNotDecayed { ratio: f64, tolerance: f64 },

    #[error("Newton search from guess {guess} did not converge after {iterations} iterations")]
    NoConvergence { guess: String, iterations: usize },

    #[error("eigenvalue search from guess {guess} left the upper half-plane (reached {reached})")]
    LowerHalfPlane { guess: String, reached: String },

    #[error("invalid discrete spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("Darboux dressing matrix is singular at t = {t}")]
    SingularDressing { t: f64 },

    #[error("eigenvalue pairing failed: {0}")]
    Pairing(String),

    #[error("symbol index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate polarization: |b1| vanishes for eigenvalue {0}")]
    DegeneratePolarization(usize),

    #[error("insufficient samples: need at least {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("missing eigenvalue trace")]
    MissingTrace,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
