use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the runtime.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: {dim} mismatch (expected {expected}, got {actual})")]
    Shape {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{op}: {channels} channels cannot be split into {scales} equal scale subsets (channels must be divisible by s)")]
    NotDivisible {
        op: &'static str,
        channels: usize,
        scales: usize,
    },

    #[error("soft threshold must be non-negative, got {value} for channel {channel}")]
    NegativeThreshold { channel: usize, value: f64 },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid config: `{field}` {constraint}")]
    InvalidConfig {
        field: &'static str,
        constraint: String,
    },

    #[error("{what}: empty input")]
    Empty { what: &'static str },

    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("tensor `{name}`: manifest shape {shape:?} holds {expected} values but {actual} are declared in the payload")]
    ManifestShape {
        name: String,
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("truncated file: needed {needed} bytes, only {available} available")]
    Truncated { needed: u64, available: u64 },

    #[error("tensor `{0}` missing from file")]
    MissingTensor(String),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, dim: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            op,
            dim,
            expected,
            actual,
        }
    }

    pub(crate) fn config(field: &'static str, constraint: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            constraint: constraint.into(),
        }
    }
}

/// Returns a shape error unless `expected == actual`.
pub(crate) fn ensure_dim(op: &'static str, dim: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::shape(op, dim, expected, actual))
    }
}
