use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Format,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("element count mismatch: tensor has {from} elements, target shape needs {to}")]
    ElementCount { from: usize, to: usize },

    #[error("{op}: shape mismatch, expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("label {label} at sample {index} is outside 0..{classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("class index {index} is outside 0..{classes}")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("validation fraction {fraction} leaves an empty partition of {total} samples")]
    EmptyPartition { fraction: f64, total: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("optimizer state requested but no optimizer is attached")]
    NoOptimizer,

    #[error("model is in inference mode; switch to training mode first")]
    InferenceMode,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: malformed CSV row {row}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error(transparent)]
    Pgm(#[from] PgmError),

    #[error(transparent)]
    ModelFile(#[from] ModelFileError),

    #[error("malformed history file: {0}")]
    History(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::InvalidConfig(_) | Error::EmptyPartition { .. } => ErrorClass::Usage,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Format,
        }
    }
}

/// Binary PGM decoding failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a PGM stream (bad magic)")]
    BadMagic,
    #[error("unsupported netpbm format {0}; only binary graymaps (P5) are accepted")]
    UnsupportedFormat(String),
    #[error("unsupported maxval {0}; only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("truncated PGM payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
}

/// Model file loading failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {found}; this build reads version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("model file truncated: needed {needed} bytes, found {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("model file checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("bad architecture descriptor: {0}")]
    Descriptor(String),
    #[error("{0} trailing bytes after checksum")]
    TrailingBytes(usize),
}
