use thiserror::Error;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad usage, bad config, or unreadable input data.
pub const EXIT_USAGE: i32 = 2;
/// Training or evaluation failed at run time.
pub const EXIT_TRAINING: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(#[source] pvreg::Error),

    #[error("output {path}: {reason}")]
    Output { path: String, reason: String },

    #[error("training: {0}")]
    Training(#[source] pvreg::Error),

    #[error("{failed} of {total} cells failed")]
    CellsFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Data(_) | CliError::Output { .. } => EXIT_USAGE,
            CliError::Training(_) | CliError::CellsFailed { .. } => EXIT_TRAINING,
        }
    }

    pub(crate) fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }
}
