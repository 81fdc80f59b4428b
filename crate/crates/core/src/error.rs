use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operator or configuration parameter is outside its accepted range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// The data handed to an operation does not satisfy its preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// An on-disk container or CSV file is malformed.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A configuration document failed schema validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("pipeline operator #{index} ({name}) failed: {source}")]
    Pipeline {
        index: usize,
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by a bad configuration or parameter rather
    /// than by the data being processed.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Param(_) | Error::Config(_) => true,
            Error::Pipeline { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
