use std::path::PathBuf;

/// Errors produced anywhere in the crate.
///
/// The variants map onto the CLI's documented exit codes through
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller supplied malformed input (dimension mismatch, bad sizes, ...).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// The data does not admit the requested protocol (single label,
    /// missing gallery identity, no positive pairs, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Non-finite values or a failed decomposition.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but is not a valid TDLM/TDLF/image file.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Prefixes the message with `context`, keeping the variant.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{context}: {m}")),
            Error::Protocol(m) => Error::Protocol(format!("{context}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{context}: {m}")),
            Error::Config(m) => Error::Config(format!("{context}: {m}")),
            Error::Format { path, msg } => Error::Format {
                path,
                msg: format!("{context}: {msg}"),
            },
            io @ Error::Io { .. } => io,
        }
    }

    /// Process exit code: 2 config, 3 I/O, 4 protocol, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::InvalidInput(_) | Error::Protocol(_) => 4,
            Error::Numerical(_) => 5,
        }
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(format!($($arg)*)) };
}

macro_rules! protocol {
    ($($arg:tt)*) => { $crate::error::Error::Protocol(format!($($arg)*)) };
}

pub(crate) use invalid;
pub(crate) use protocol;
