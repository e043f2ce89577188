use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A persistent file (frequency table, anon profile, scenario config) failed to parse.
    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("rank {rank} out of range 1..={unique}")]
    RankOutOfRange { rank: usize, unique: usize },

    #[error("cannot draw {requested} rows without replacement from {available} users")]
    SampleTooLarge { requested: u64, available: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn format(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// Attach a file name to a format error produced by a reader-based loader.
    pub fn with_source_name(self, name: &str) -> Self {
        match self {
            Error::Format { line, message, .. } => Error::Format {
                source_name: name.to_string(),
                line,
                message,
            },
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{name}: {e}"))),
            other => other,
        }
    }

    /// True for errors caused by input data rather than by caller-supplied parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Format { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
