use thiserror::Error;

/// Errors produced by the core geometry, hand, scene and detection modules.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path} at line {line}: {message}")]
    MalformedFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("insufficient points: requested {requested}, have {available}")]
    InsufficientPoints { requested: usize, available: usize },

    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondence(String),

    #[error("invalid hand config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty scene: no object could be placed")]
    EmptyScene,

    #[error("insufficient contacts: {present} finger classes present, need {needed}")]
    InsufficientContacts { present: usize, needed: usize },

    #[error("numerical failure: {message} (iteration {iteration})")]
    NumericalFailure { message: String, iteration: usize },
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
