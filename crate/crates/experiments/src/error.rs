use mtem_core::SdeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("insufficient sample: {0} replicates requested, at least {min} required", min = mtem_core::analysis::MIN_SURVIVORS)]
    TooFewReplicates(usize),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 runtime failure, 2 bad configuration, 3 too few samples.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::TooFewReplicates(_) | CliError::Sde(SdeError::InsufficientSample { .. }) => 3,
            CliError::Sde(
                SdeError::InvalidParameter(_)
                | SdeError::Dimension { .. }
                | SdeError::StepOutsideDomain { .. }
                | SdeError::LevelOutOfRange { .. }
                | SdeError::LadderTooDeep(_)
                | SdeError::ProfileNotInvertible,
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
