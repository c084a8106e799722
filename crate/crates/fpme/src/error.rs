use std::io;
use std::path::{Path, PathBuf};

use fpme_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable or inconsistent input files.
    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn parse(path: &Path, reason: impl ToString) -> Self {
        CliError::Parse { path: path.to_path_buf(), reason: reason.to_string() }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 for anything the user can fix in the inputs, 2 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::Config(_) | CoreError::Domain(_) | CoreError::Precondition(_) => 1,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
