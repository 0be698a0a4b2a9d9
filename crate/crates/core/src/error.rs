use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed audio file: {0}")]
    Format(String),

    #[error("unsupported channel count {0} (only mono input is accepted)")]
    UnsupportedChannels(u16),

    #[error("audio clip contains no samples")]
    EmptyAudio,

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "non-finite training loss at epoch {epoch}, batch {batch} (parameter L2 norm {param_norm})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },

    #[error("unrecognized file format: {0}")]
    ArtifactFormat(String),

    #[error("unsupported artifact version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt artifact: {0}")]
    Corrupt(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("no audio files found under {0}")]
    EmptyManifest(PathBuf),

    #[error("duplicate clip path {0}")]
    DuplicatePath(PathBuf),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
