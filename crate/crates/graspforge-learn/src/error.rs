use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {message} (step {step})")]
    NumericalFailure { message: String, step: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad checkpoint {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Core(#[from] graspforge_core::CoreError),
}

impl LearnError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        LearnError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        LearnError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
