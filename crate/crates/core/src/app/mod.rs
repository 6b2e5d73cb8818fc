//! Data ingestion, configuration, file formats and the train / test /
//! estimate / scenario workflows behind the command line.

pub mod config;
pub mod io;
pub mod schedule;
pub mod split;
pub mod synthetic;
pub mod workflow;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;
use crate::posterior::PosteriorError;
use crate::sampler::SamplerError;
use crate::scenario::ScenarioError;

pub use config::RunConfig;
pub use split::{split, SplitError, SplitMode};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: missing {}", path.display(), missing.join(", "))]
    Schema { path: PathBuf, missing: Vec<String> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing trained parameters in {}", .0.display())]
    MissingTrained(PathBuf),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }
}
