use std::path::{Path, PathBuf};

use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed files, shape or version mismatches.
    #[error("format error: {0}")]
    Format(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Prefixes a format message with the offending file.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Format(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<latdyn::Error> for CliError {
    fn from(e: latdyn::Error) -> Self {
        use latdyn::Error as E;
        match e {
            E::Config(_) => CliError::Config(e.to_string()),
            E::Divergence { .. } => CliError::Divergence(e.to_string()),
            E::Dimension(_) | E::InvalidInput(_) | E::Fit(_) | E::ParamNotOnTape(_) => CliError::Format(e.to_string()),
        }
    }
}
