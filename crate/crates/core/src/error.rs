use num_complex::Complex64;
use thiserror::Error;

use crate::domain::Region;

pub type Result<T> = std::result::Result<T, HeunError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeunError {
    #[error("parameter `{name}` is not a finite complex number")]
    NonFinite { name: &'static str },

    #[error("z = {z} is a singular point of the equation")]
    SingularPoint { z: Complex64 },

    #[error("gamma = {gamma} is a nonpositive integer; the generic recurrence is undefined")]
    NonPositiveIntegerGamma { gamma: Complex64 },

    #[error("gamma = {gamma} is outside the class required by {what}")]
    WrongGammaClass { gamma: Complex64, what: &'static str },

    #[error("series did not converge within {terms} terms (last term {last_term:e})")]
    NoConvergence { terms: usize, last_term: f64 },

    #[error("z = {z} is outside the convergence disc of radius {radius} about {center}")]
    OutOfDisc {
        z: Complex64,
        center: Complex64,
        radius: f64,
    },

    #[error("value is unbounded at z = {z}: {detail}")]
    SingularValue { z: Complex64, detail: &'static str },

    #[error("step size {step:e} underflowed at hop {hop} near z = {z}")]
    StepUnderflow { hop: usize, z: Complex64, step: f64 },

    #[error("continuation exceeded {max} steps")]
    MaxSteps { max: usize },

    #[error("continuation hop {hop} ({from} -> {to}) failed: {source}")]
    Hop {
        hop: usize,
        from: Complex64,
        to: Complex64,
        #[source]
        source: Box<HeunError>,
    },

    #[error("epsilon = 0 is not supported by {what}")]
    EpsilonZero { what: &'static str },

    #[error("{what} requires epsilon = 0 and alpha != 0")]
    WrongAsymptoticCase { what: &'static str },

    #[error("matching matrix is singular (scaled determinant {scaled_det:e})")]
    SingularMatrix { scaled_det: f64 },

    #[error("exponential factor overflows (log-magnitude {log_magnitude})")]
    Overflow { log_magnitude: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("residual estimate is unreliable near z* = q/alpha")]
    NearZStar,

    #[error("z = {z} lies in the exclusion zone of identity case {case}")]
    Excluded { case: usize, z: Complex64 },

    #[error("the grid has no points")]
    EmptyGrid,

    #[error("unknown identity case {0} (expected 1..=9)")]
    UnknownCase(usize),

    #[error("{region:?} evaluation via {module} failed: {source}")]
    Dispatch {
        region: Region,
        module: &'static str,
        #[source]
        source: Box<HeunError>,
    },
}

impl HeunError {
    /// Strips dispatch and hop wrappers.
    pub fn root(&self) -> &HeunError {
        match self {
            HeunError::Dispatch { source, .. } | HeunError::Hop { source, .. } => source.root(),
            other => other,
        }
    }

    /// Index of the continuation hop that failed, if the error came from one.
    pub fn hop(&self) -> Option<usize> {
        match self {
            HeunError::Dispatch { source, .. } => source.hop(),
            HeunError::Hop { hop, .. } | HeunError::StepUnderflow { hop, .. } => Some(*hop),
            _ => None,
        }
    }
}
