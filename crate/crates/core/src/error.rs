use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the training engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("node {0} is not a scalar on this tape")]
    NotScalarLoss(usize),

    #[error("node {0} does not belong to this tape")]
    UnknownNode(usize),

    #[error("non-finite {what} at {location}")]
    NonFinite { what: String, location: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing cell: sample {sample}, channel {channel}, t={t}")]
    MissingCell { sample: String, channel: usize, t: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
