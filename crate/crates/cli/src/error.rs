use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: key `{key}`: {msg}")]
    Config {
        path: String,
        line: usize,
        key: String,
        msg: String,
    },

    #[error(transparent)]
    Core(#[from] gel_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A check or assertion that ran to completion and failed.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: parse 2, validation 3, numeric or resource 4,
    /// I/O 5, failed check 1.
    pub fn exit_code(&self) -> i32 {
        use gel_core::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) => match e {
                E::Parse { .. } | E::Config(_) => 2,
                E::Numeric(_) | E::Resource(_) => 4,
                E::Validation(_)
                | E::Generation(_)
                | E::State(_)
                | E::Hypothesis(_)
                | E::DegenerateInput(_)
                | E::NoPrediction(_) => 3,
            },
            CliError::Io { .. } => 5,
            CliError::Failure(_) => 1,
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
