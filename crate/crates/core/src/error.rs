//! Error types shared across the pipeline.

use thiserror::Error;

/// Unified error type for the sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation (bad sweep bounds, negative sizes, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A scenario, model name, or configuration value was not recognized.
    #[error("configuration error: {0}")]
    Config(String),

    /// The reference clip of an energy ratio has zero energy.
    #[error("degenerate reference: reference clip has zero energy")]
    DegenerateReference,

    /// Clip shorter than one analysis window.
    #[error("input too short: clip has {len} samples, need at least {window}")]
    InputTooShort { len: usize, window: usize },

    /// Tensor/parameter shapes do not match the model spec.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A class label was out of range or otherwise unusable.
    #[error("label error: {0}")]
    Label(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// Contrastive pair sampling found an object observed in a single pose.
    #[error("pairing error: object {0} has samples in only one pose")]
    SinglePoseObject(String),

    /// A distance-matrix category has no members.
    #[error("empty category: {0}")]
    EmptyCategory(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    /// On-disk artifact malformed (bad magic, truncated blob, schema drift).
    #[error("format error: {0}")]
    Format(String),
}

/// Coarse error category, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad inputs or configuration supplied by the caller.
    Config,
    /// Failures while running (I/O, malformed artifacts, internal mismatches).
    Runtime,
    /// Training diverged.
    Divergence,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Label(_)
            | Error::EmptyCategory(_)
            | Error::SinglePoseObject(_)
            | Error::InputTooShort { .. }
            | Error::DegenerateReference => ErrorCategory::Config,
            Error::Divergence { .. } => ErrorCategory::Divergence,
            Error::ShapeMismatch(_) | Error::Io(_) | Error::Json(_) | Error::Format(_) => {
                ErrorCategory::Runtime
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
