use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("frame {width}x{height} is smaller than the required {min}x{min}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("gripper channel never crosses either threshold")]
    Undecidable,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dim { expected: usize, actual: usize },
    #[error("invalid embodiment descriptor: {0}")]
    Descriptor(String),
    #[error("mask error: {0}")]
    Mask(String),
    #[error("cannot retarget slots: {}", .0.join(", "))]
    Retarget(Vec<String>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("query {query} outside [{lo}, {hi}]")]
    Range { query: f64, lo: f64, hi: f64 },
    #[error("layout error: {0}")]
    Layout(String),
    #[error("instruction is not reversible: {0:?}")]
    NotReversible(String),
    #[error("critic error at step {step}: {message}")]
    Critic { step: usize, message: String },
    #[error("config error in {file}: {message}")]
    Config { file: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
