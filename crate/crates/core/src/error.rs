use std::path::PathBuf;

/// Errors produced by the registration library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid cluster count k={k} for {points} points")]
    InvalidK { k: usize, points: usize },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("kernel {0} is not supported by this operation")]
    UnsupportedKernel(String),

    #[error("correspondence is empty")]
    EmptyCorrespondence,

    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: row has {found} coordinates, expected {expected}")]
    MixedDimensions {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported dimension {dim} for {format}")]
    UnsupportedDimension { dim: usize, format: &'static str },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
