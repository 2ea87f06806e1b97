use std::path::PathBuf;

/// Errors from file IO, formats, configuration and the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] dmdsc_core::Error),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{}: line {line}: expected {expected} columns, found {found}", path.display())]
    Dimension {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{}: file has no data rows", .0.display())]
    EmptyFile(PathBuf),

    #[error("{}: unsupported checkpoint version {found:?} (this build reads {expected:?})", path.display())]
    Version {
        path: PathBuf,
        found: String,
        expected: &'static str,
    },

    #[error("{}: checkpoint integrity check failed: {reason}", path.display())]
    Integrity { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Bad user input (flags, config values, data that breaks a precondition)
    /// as opposed to a failure while doing the work.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Core(e) => e.is_validation(),
            Error::Config(_) => true,
            _ => false,
        }
    }

    /// Process exit code: 1 for validation errors, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}
