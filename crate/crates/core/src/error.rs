use thiserror::Error;

/// Errors produced by the synthesis, signal-processing, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition (bad parameter, out-of-gate
    /// trajectory, inconsistent dimensions the caller controls).
    #[error("validation: {0}")]
    Validation(String),

    /// A tensor or cube did not have the shape the operation requires.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// Label-dependent operation applied to a label it is not defined for.
    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// A binary file had a bad magic number, version, or was truncated.
    #[error("file format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    ConfigParse(String),

    #[error("manifest parse: {0}")]
    ManifestParse(String),

    /// Training diverged: the loss became NaN or infinite.
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    /// A ratio metric was requested with a zero denominator.
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate bad user input rather than an
    /// internal or environmental failure. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::ShapeMismatch { .. }
                | Error::InvalidLabel(_)
                | Error::Format(_)
                | Error::ConfigParse(_)
                | Error::ManifestParse(_)
                | Error::UndefinedMetric(_)
        )
    }
}
