use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A row or record of an input file does not match its schema.
    #[error("{origin}:{line}: {message}")]
    Schema {
        origin: String,
        line: usize,
        message: String,
    },

    /// An external plugin (or a built-in strategy standing in for one)
    /// broke the request/response contract.
    #[error("protocol error from {plugin}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Protocol {
        plugin: String,
        line: Option<usize>,
        message: String,
    },

    /// An edit script that does not cover its source.
    #[error("malformed edit script: {0}")]
    Script(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// Wraps another error with the id of the input that triggered it.
    #[error("input {id}: {source}")]
    AtInput {
        id: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn schema(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Schema { origin: origin.into(), line, message: message.into() }
    }

    pub fn protocol(plugin: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Protocol { plugin: plugin.into(), line, message: message.into() }
    }

    pub fn at_input(self, id: usize) -> Self {
        Error::AtInput { id, source: Box::new(self) }
    }

    /// Short machine-readable category, used by the CLI's error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema { .. } => "schema",
            Error::Protocol { .. } => "protocol",
            Error::Script(_) => "script",
            Error::Invalid(_) => "invalid",
            Error::AtInput { source, .. } => source.kind(),
        }
    }
}
