//! Error types and their process exit codes.

use std::fmt;
use std::path::PathBuf;

use crate::nifti::NiftiError;
use crate::weights::WeightsError;

/// Exit-code table (also in `--help` and the README):
/// 0 success, 2 usage, 3 file I/O or NIfTI format, 4 weight manifest,
/// 5 processing (geometry, engine, metrics, training).
pub type ExitCode = i32;

#[derive(Debug)]
pub enum CliError {
    Nifti { path: PathBuf, source: NiftiError },
    Weights { path: PathBuf, source: WeightsError },
    Io { path: PathBuf, source: std::io::Error },
    Core(mindgrab_core::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => 2,
            CliError::Nifti { .. } | CliError::Io { .. } => 3,
            CliError::Weights { .. } => 4,
            CliError::Core(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Nifti { path, source } => {
                write!(f, "{}: {}", path.display(), source)
            }
            CliError::Weights { path, source } => {
                write!(f, "{}: {}", path.display(), source)
            }
            CliError::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mindgrab_core::Error> for CliError {
    fn from(e: mindgrab_core::Error) -> Self {
        CliError::Core(e)
    }
}
