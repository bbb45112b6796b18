use std::path::PathBuf;

use surgsched::instgen::{GenError, InstanceIoError};
use surgsched::solution::SolutionError;
use surgsched::SolveError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Instance(#[from] InstanceIoError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 usage, 2 input/output, 3 broken invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Instance(_) | CliError::Csv(_) => 2,
            CliError::Solution(SolutionError::Io { .. } | SolutionError::Parse(_)) => 2,
            CliError::Generate(GenError::InvalidParams(_) | GenError::WindowUnreachable { .. }) => 1,
            CliError::Generate(_) => 3,
            CliError::Solution(_) | CliError::Solve(_) | CliError::Verification(_) => 3,
        }
    }
}
