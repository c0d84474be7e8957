use std::path::PathBuf;

/// Errors produced across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("too many malformed lines in {path}: {malformed} of {total} (first offenders at lines {offenders:?})")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
        offenders: Vec<usize>,
    },

    #[error("heterogeneous attribute sets: symmetric difference {difference:?}")]
    HeterogeneousAttributes { difference: Vec<String> },

    #[error("attribute set mismatch: missing {missing:?}, extra {extra:?}")]
    AttributeMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file error: {0}")]
    Model(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
