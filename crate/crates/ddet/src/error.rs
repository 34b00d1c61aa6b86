use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ddet_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },
    #[error("annotation line {line}: unknown label \"{label}\" (known labels: {known})")]
    UnknownLabel { line: usize, label: String, known: String },
    #[error("ppm: {0}")]
    Ppm(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("unknown key '{key}' in [{section}]")]
    UnknownKey { key: String, section: String },
    #[error("{0}")]
    Dataset(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Usage errors exit with 1, everything else with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } | Error::UnknownKey { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
