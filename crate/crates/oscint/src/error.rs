//! Error type shared across the integrator library.

use thiserror::Error;

/// Errors produced by profile construction, the oscillatory-polynomial
/// algebra, and the steppers built on top of them.
#[derive(Debug, Error)]
pub enum OscError {
    /// A periodic profile was constructed with inconsistent data.
    #[error("invalid periodic profile: {0}")]
    InvalidProfile(String),

    /// The oscillation parameter must be positive and finite.
    #[error("oscillation parameter must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    /// A time step must be positive and finite.
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),

    /// Two oscillatory polynomials over different ε cannot be combined.
    #[error("oscillatory polynomials use different epsilon: {left} vs {right}")]
    EpsilonMismatch { left: f64, right: f64 },

    /// A nested integral needs at least one integrand.
    #[error("nested integral requires a non-empty integrand sequence")]
    EmptySequence,

    /// A system or state had an unexpected dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An explicit-scheme order outside the supported range was requested.
    #[error("scheme order must be between 1 and {max}, got {got}")]
    UnsupportedOrder { got: usize, max: usize },

    /// An implicit step's linear solve failed (singular step matrix).
    #[error("implicit step solve failed: {0}")]
    SolveFailed(String),

    /// Reference-solver self-convergence gate failed.
    #[error("reference solution failed its self-convergence gate: {0}")]
    ReferenceGateFailed(String),

    /// Root finding did not converge.
    #[error("root finding failed: {0}")]
    RootFindingFailed(String),

    /// A configuration value was rejected.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
