use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A state was at or beyond the guard band around the safe-set boundary.
    #[error("state {index} = {value} is outside the guarded safe set (|x| < {limit})")]
    DomainViolation { index: usize, value: f64, limit: f64 },

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    /// A structural factor that must stay nonzero (Φ, 𝒢₂) vanished or blew up.
    #[error("singularity detected in {what} (value {value})")]
    SingularityDetected { what: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("integration step rejected at t = {t}: {source}")]
    StepRejected {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Innermost cause, unwrapping any `StepRejected` layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepRejected { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            Error::StepRejected { t, .. } => Some(*t),
            _ => None,
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteInput(what))
    }
}
