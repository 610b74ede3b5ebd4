use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("invalid {what} at index {index}: {message}")]
    Validation {
        what: &'static str,
        index: usize,
        message: String,
    },

    #[error("Gaussian behind camera in view {view} at pixel (row {row}, col {col}), depth {depth}")]
    BehindCamera {
        view: usize,
        row: usize,
        col: usize,
        depth: f64,
    },

    #[error("invalid plane: {0}")]
    InvalidPlane(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at pixel {index}")]
    NonFinite { index: usize },

    #[error("unknown channel class `{0}`")]
    UnknownChannel(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt container in section `{section}`: {message}")]
    Corrupt {
        section: &'static str,
        message: String,
    },

    #[error("bitstream error at bit {bit_offset}: {message}")]
    Bitstream { bit_offset: u64, message: String },

    #[error("external codec unavailable: {0}")]
    BackendUnavailable(String),

    #[error("external codec `{program}` failed ({status}): {stderr}")]
    Process {
        program: String,
        status: String,
        stderr: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the external codec adapter.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::BackendUnavailable(_) | Error::Process { .. })
    }
}
