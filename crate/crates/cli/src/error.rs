use std::fmt;

use thiserror::Error;

/// Pipeline stage an error came from, shown as a `[stage]` prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Labels,
    Score,
    Split,
    Calibrate,
    Classify,
    Evaluate,
    Complexity,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Config => "config",
            Self::Load => "load",
            Self::Labels => "labels",
            Self::Score => "score",
            Self::Split => "split",
            Self::Calibrate => "calibrate",
            Self::Classify => "classify",
            Self::Evaluate => "evaluate",
            Self::Complexity => "complexity",
            Self::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("[{stage}] {source}")]
    Core {
        stage: Stage,
        #[source]
        source: selsql::Error,
    },

    #[error("[{stage}] {message}")]
    Data { stage: Stage, message: String },
}

impl CliError {
    pub fn data(stage: Stage, message: impl Into<String>) -> Self {
        Self::Data {
            stage,
            message: message.into(),
        }
    }

    /// 1 for usage errors, 2 for everything caused by the data.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            _ => 2,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Usage(_) => None,
            Self::Core { stage, .. } | Self::Data { stage, .. } => Some(*stage),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> StageExt<T> for selsql::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
