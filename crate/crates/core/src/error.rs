//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or vector input failed validation (non-finite, out of range,
    /// wrong sign).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two paired inputs have inconsistent lengths.
    #[error("length mismatch: {context} (left {left}, right {right})")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// The mapped inertia matrix is singular or too ill-conditioned to solve.
    #[error("singular dynamics at theta = {theta:?} (condition number {condition:.3e})")]
    SingularDynamics { theta: Vec<f64>, condition: f64 },

    /// The effective tendon actuation map is rank deficient.
    #[error("actuation singularity: effective tendon map is rank deficient (min singular value {min_singular:.3e})")]
    ActuationSingularity { min_singular: f64 },

    /// The sliding-mode input gain is numerically zero.
    #[error("control singularity: |L_g sigma| = {l_g:.3e} below 1e-12 on channel {channel}")]
    ControlSingularity { channel: usize, l_g: f64 },

    /// Training produced a non-finite loss.
    #[error("training failure: non-finite loss at epoch {epoch}")]
    TrainingFailure { epoch: usize },

    /// Configuration file or flag error.
    #[error("configuration error: {0}")]
    Config(String),

    /// A referenced file (network model, config) does not exist.
    #[error("missing artifact: {path}")]
    MissingArtifact { path: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
