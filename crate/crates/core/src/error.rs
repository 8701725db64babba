use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{}:{line}: {message}", path.display())]
    Ingestion {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("missing features for {count} node(s): {}", ids.join(", "))]
    Coverage { count: usize, ids: Vec<String> },
    #[error("type error: {0}")]
    Type(String),
    #[error("node {0} has no meta-path instances of either schema")]
    Isolation(String),
    #[error("state error: {0}")]
    State(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("AUC is undefined when only one class is present")]
    AucUndefined,
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn coverage(mut ids: Vec<String>) -> Self {
        ids.sort();
        let count = ids.len();
        ids.truncate(10);
        Error::Coverage { count, ids }
    }

    /// True for errors caused by bad input data rather than by the run itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Conflict(_)
                | Error::NotFound(_)
                | Error::Schema(_)
                | Error::Ingestion { .. }
                | Error::Coverage { .. }
                | Error::Type(_)
                | Error::Isolation(_)
                | Error::Data(_)
                | Error::AucUndefined
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
