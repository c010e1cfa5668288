use std::process::ExitCode;

use shockwalk::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    Usage = 2,
    Resource = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Config(_) => Status::Usage,
            CliError::Core(e) => match e {
                CoreError::Budget { .. }
                | CoreError::Truncation { .. }
                | CoreError::CappedRun { .. }
                | CoreError::Inconclusive { .. } => Status::Resource,
                _ => Status::Usage,
            },
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => Status::Resource,
        }
    }
}
