use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad configuration or inconsistent inputs. Exit code 1.
    #[error("{0}")]
    Config(String),
    /// Unreadable input or unwritable output. Exit code 2.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Io(_) => 2,
        }
    }
}

impl From<timerefine::IngestError> for CliError {
    fn from(e: timerefine::IngestError) -> Self {
        Self::Io(e.to_string())
    }
}
