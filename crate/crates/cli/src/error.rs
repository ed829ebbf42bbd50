use std::fmt;
use std::path::PathBuf;

/// Everything that can end a run early, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Core(ohs_core::Error),
    Input { path: PathBuf, message: String },
    Parse { path: PathBuf, line: u64, message: String },
    Usage(String),
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl fmt::Display) -> Self {
        Self::Input {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => e.kind(),
            Self::Input { .. } => "input",
            Self::Parse { .. } => "parse",
            Self::Usage(_) => "usage",
            Self::Output { .. } => "output",
        }
    }

    /// 2 for bad inputs, 3 for numerical failures inside the library.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) if !e.is_user_error() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Core(e) => write!(f, "{e}"),
            Self::Input { path, message } => write!(f, "{}: {message}", path.display()),
            Self::Parse { path, line, message } => write!(f, "{}: line {line}: {message}", path.display()),
            Self::Usage(m) => f.write_str(m),
            Self::Output { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ohs_core::Error> for CliError {
    fn from(e: ohs_core::Error) -> Self {
        Self::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
