//! Antimicrobial-resistance prediction toolkit: ICU cohort ingestion, a
//! leakage-safe feature pipeline, stay-grouped splits, six learners, ROC/AUC
//! reporting, and a synthetic cohort generator with known ground truth.

pub mod artifact;
pub mod cli;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod scalar;
pub mod splits;
pub mod synth;

use thiserror::Error;

pub use eval::EvalError;
pub use features::FeatureError;
pub use ingest::IngestError;
pub use models::ModelError;
pub use splits::SplitError;
pub use synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes; each maps to one process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Fit,
    Evaluation,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::Fit => "fit",
            Category::Evaluation => "evaluation",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Fit => 4,
            Category::Evaluation => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Artifact(#[from] artifact::ArtifactError),
    /// Failure writing an output file.
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::Synth(SynthError::Config(_)) => Category::Config,
            Error::Ingest(_) | Error::Feature(_) | Error::Split(_) | Error::Artifact(_) => Category::Data,
            Error::Model(_) => Category::Fit,
            Error::Eval(_) | Error::Output { .. } | Error::Synth(SynthError::Write { .. }) => Category::Evaluation,
        }
    }

    pub(crate) fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Error::Output { path: path.display().to_string(), message: e.to_string() }
    }
}
