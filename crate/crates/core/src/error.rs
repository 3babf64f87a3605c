use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix of shape {rows}x{cols} needs {expected} values, got {actual}")]
    BadLength {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: bad IDX magic number 0x{magic:08x}")]
    IdxBadMagic { path: PathBuf, magic: u32 },

    #[error(
        "{path}: unsupported IDX element type 0x{code:02x} (only 0x08 unsigned byte is supported)"
    )]
    IdxUnsupportedType { path: PathBuf, code: u8 },

    #[error("{path}: truncated IDX file, expected {expected} bytes but found {actual}")]
    IdxTruncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("{path}: IDX file has {extra} trailing bytes after the declared payload")]
    IdxTrailing { path: PathBuf, extra: usize },

    #[error("{path}: expected IDX {expected} file, found {found}")]
    IdxKind {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },

    #[error("{path}: row {row}: {reason}")]
    CsvRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unknown synthetic dataset {name:?}; valid names are {valid}")]
    UnknownDataset { name: String, valid: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
