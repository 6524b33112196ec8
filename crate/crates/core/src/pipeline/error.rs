use std::path::PathBuf;

use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::bridge::BridgeError;
use crate::datamodel::DataError;
use crate::mlcore::MlError;
use crate::phm::PhmError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("stage {stage} needs {artifact}; run the earlier stage first")]
    MissingPrerequisite { stage: &'static str, artifact: String },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("report {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Phm(#[from] PhmError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Bridge(BridgeError::InvalidBinning(_) | BridgeError::InvalidBands(_)) => 2,
            PipelineError::Data(DataError::Io { .. }) | PipelineError::Io { .. } => 1,
            PipelineError::Data(DataError::InvalidConfig(_)) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::MissingPrerequisite { .. } | PipelineError::MissingArtifact(_) | PipelineError::Report(_) => 4,
            PipelineError::Bridge(BridgeError::Document(_)) | PipelineError::Phm(PhmError::Document(_)) => 4,
            PipelineError::Bridge(_) | PipelineError::Phm(_) | PipelineError::Ml(_) | PipelineError::Analytics(_) => 5,
        }
    }
}
