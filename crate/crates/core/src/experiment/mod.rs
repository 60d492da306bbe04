//! Experiment orchestration: configuration files, checkpoints, manifests,
//! and the end-to-end commands behind the CLI.

mod checkpoint;
mod commands;
mod config;
mod manifest;

pub use checkpoint::{Checkpoint, CheckpointKind, GridResult, IdentifyReport};
pub use commands::{cmd_compare, cmd_deploy, cmd_identify, cmd_pretrain, DeployOutput};
pub use config::{
    AnalysisOptions, ControllerChoice, ExperimentConfig, IdentifyOptions, PretrainOptions,
    SiteConfig, WeatherSource,
};
pub use manifest::RunManifest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 config, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) | ExperimentError::Io { .. } => 3,
            ExperimentError::Numerical(_) => 4,
        }
    }
}

impl From<crate::plant::PlantError> for ExperimentError {
    fn from(e: crate::plant::PlantError) -> Self {
        match e {
            crate::plant::PlantError::Io { path, source } => ExperimentError::Io { path, source },
            crate::plant::PlantError::BadConfig(msg) => ExperimentError::Config(msg),
            other => ExperimentError::Data(other.to_string()),
        }
    }
}

impl From<crate::controllers::ControlError> for ExperimentError {
    fn from(e: crate::controllers::ControlError) -> Self {
        ExperimentError::Numerical(e.to_string())
    }
}

impl From<crate::controllers::IdentifyError> for ExperimentError {
    fn from(e: crate::controllers::IdentifyError) -> Self {
        ExperimentError::Numerical(e.to_string())
    }
}

impl From<crate::analysis::AnalysisError> for ExperimentError {
    fn from(e: crate::analysis::AnalysisError) -> Self {
        ExperimentError::Numerical(e.to_string())
    }
}

fn write_atomic(path: &std::path::Path, contents: &str) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .map_err(|source| ExperimentError::Io { path: tmp.display().to_string(), source })?;
    std::fs::rename(&tmp, path)
        .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}
