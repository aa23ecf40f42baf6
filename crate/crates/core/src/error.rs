use thiserror::Error;

/// Errors produced by curve construction, matching and database operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("index out of range: {index} (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate correspondences: {0}")]
    DegenerateFit(String),
    #[error("singular transform cannot be inverted")]
    SingularTransform,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("duplicate record id: {0}")]
    DuplicateId(String),
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("database format error: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
