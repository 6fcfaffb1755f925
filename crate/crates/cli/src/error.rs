use std::fmt;
use std::path::PathBuf;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Flags that parse but are invalid together or out of range.
    Usage(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Core(sparfa_lite::Error),
}

impl CliError {
    /// 1 for I/O, 2 for usage and invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_io() => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Usage(_) | CliError::Core(_) => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<sparfa_lite::Error> for CliError {
    fn from(e: sparfa_lite::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
