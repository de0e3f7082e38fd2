//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CalcError {
    /// Quadrature ran out of budget before reaching the requested tolerance.
    /// Carries the achieved error estimate so callers can decide whether the
    /// partial answer is still usable.
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    /// The integrand evaluated to NaN or an unexpected infinity.
    #[error("non-finite integrand value at t = {at}")]
    NonFiniteIntegrand { at: f64 },

    /// A law fell outside the domain of a mapping.
    #[error("law is outside the mapping domain: {reason}")]
    NotInDomain { reason: String },

    /// Invalid construction parameters (bad interval, negative mass, ...).
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// A clock reversal was requested for a clock with infinite left limit.
    #[error("clock reversal requires a finite left limit r(a+)")]
    UnsupportedReversal,

    /// Operation not available for this representation (opaque transforms,
    /// numeric image clocks without a closed form, ...).
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl CalcError {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        CalcError::Invalid {
            what,
            why: why.into(),
        }
    }

    pub fn not_in_domain(reason: impl Into<String>) -> Self {
        CalcError::NotInDomain {
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CalcError>;
