use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad format in {path}: {message}")]
    Format { path: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("revalidation failed: {0}")]
    Revalidation(String),

    #[error(transparent)]
    Core(#[from] graspforge_core::CoreError),
}

impl DataError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        DataError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
