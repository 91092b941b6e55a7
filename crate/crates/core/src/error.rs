use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// Rabi amplitude ratios violate the unit-sphere constraints beyond the
    /// numerical clamping window; usually a sign of drift or a bad fit.
    #[error("inconsistent amplitudes: {0}")]
    InconsistentAmplitudes(String),

    /// A phase-based reconstruction was attempted on a trace whose phase is
    /// undefined (state sits on the drive axis).
    #[error("ambiguous state: {0}")]
    AmbiguousState(String),

    #[error("representation error: {0}")]
    Representation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
