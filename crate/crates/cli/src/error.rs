use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A problem at a position in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", join(.0))]
    Config(Vec<Located>),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Matrix { path: PathBuf, source: ando_core::Error },

    #[error(transparent)]
    Core(#[from] ando_core::Error),

    #[error("{0}")]
    Usage(String),
}

fn join(errs: &[Located]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn config(line: usize, column: usize, message: impl Into<String>) -> Self {
        CliError::Config(vec![Located { line, column, message: message.into() }])
    }

    /// Located errors of a config failure (empty for other kinds).
    pub fn located(&self) -> &[Located] {
        match self {
            CliError::Config(v) => v,
            _ => &[],
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
