use thiserror::Error;

use crate::curve::MomentCurve;
use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Particle state went non-finite. Carries everything recorded up to the
/// last accepted step.
#[derive(Debug, Clone)]
pub struct BlowUp {
    pub step: u64,
    pub time: f64,
    pub particle: usize,
    pub partial: MomentCurve,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported spec: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid spec:\n{0}")]
    Invalid(ValidationReport),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("blow-up at step {} (t = {}), particle {}", .0.step, .0.time, .0.particle)]
    BlowUp(Box<BlowUp>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
