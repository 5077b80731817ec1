use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::registry::RegistryError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "sample {sample_id}: no acceptable realization with >= {n_out} retained emitters \
         after {retries} attempts (retained-count histogram {observed:?})"
    )]
    NonConvergent {
        sample_id: u64,
        n_out: usize,
        retries: u64,
        observed: BTreeMap<usize, u64>,
    },
    #[error("{}: malformed manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("integrity check failed for {file}: manifest sha256 {expected}, file sha256 {actual}")]
    Integrity {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
