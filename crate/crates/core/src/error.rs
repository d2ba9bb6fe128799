use std::path::PathBuf;

/// Errors raised anywhere in the stream-learning pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input does not match the declared feature schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell could not be parsed. `row` is the 1-based data row (header excluded).
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Invalid configuration of a component or an experiment.
    #[error("config error: {0}")]
    Config(String),

    /// A value fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is too small or degenerate for the requested fit.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An operation was invoked in the wrong lifecycle state.
    #[error("invalid state: {0}")]
    State(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Parse { .. }
                | Error::Domain(_)
                | Error::Degenerate(_)
                | Error::Io { .. }
                | Error::Csv { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
