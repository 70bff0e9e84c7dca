use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: adp_lqr::Error,
    },

    #[error("plot: {0}")]
    Plot(String),

    #[error("report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches the pipeline phase to a library error.
pub trait PhaseContext<T> {
    fn phase(self, phase: &'static str) -> CliResult<T>;
}

impl<T> PhaseContext<T> for adp_lqr::Result<T> {
    fn phase(self, phase: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Phase { phase, source })
    }
}
