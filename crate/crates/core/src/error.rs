use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rule file line {line}: {message}")]
    RuleFile { line: usize, message: String },

    #[error("findings file {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("prompt template: {0}")]
    Template(String),

    #[error("memory pool: {0}")]
    Pool(String),

    #[error(transparent)]
    Backend(#[from] BackendError),
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
