use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, failed invariant, malformed file.
    Validation,
    /// A numerical procedure failed (singular system, divergence, no convergence).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contact pose ({x:.3}, {y:.3}) mm lies outside the active area {width:.3}x{height:.3} mm")]
    OutOfBounds { x: f64, y: f64, width: f64, height: f64 },

    #[error("invalid indenter shape: {0}")]
    InvalidShape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (usize, usize), actual: (usize, usize) },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("singular projection{}: ray is parallel to the shadow plane", light.map(|i| format!(" for light {i}")).unwrap_or_default())]
    SingularProjection { light: Option<usize> },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("rank-deficient normal matrix: {0}")]
    RankDeficient(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("fit did not converge after {iterations} iterations (best parameter {best:e}, cost {best_cost:e})")]
    NonConvergence { iterations: usize, best: f64, best_cost: f64, trace: Vec<f64> },

    #[error("degenerate fit for {what}: {reason}")]
    DegenerateFit { what: String, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("missing file {}: {what}", path.display())]
    MissingFile { path: PathBuf, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SingularProjection { .. }
            | Error::Degenerate(_)
            | Error::RankDeficient(_)
            | Error::Diverged { .. }
            | Error::NonConvergence { .. }
            | Error::DegenerateFit { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }
}
