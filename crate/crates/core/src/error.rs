use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("sentence {id}: {tokens} tokens but {vectors} vectors")]
    Alignment {
        id: String,
        tokens: usize,
        vectors: usize,
    },

    #[error("empty {0}")]
    Empty(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("forward cache does not match the current parameters")]
    StaleCache,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("missing {kind} `{name}`")]
    Missing { kind: &'static str, name: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn missing(kind: &'static str, name: impl Into<String>) -> Self {
        Error::Missing {
            kind,
            name: name.into(),
        }
    }
}
