//! The two-tower tappability network, its training loop, checkpoints and
//! inference.

mod checkpoint;
mod config;
mod network;
mod predict;
mod train;

pub use checkpoint::{ArrayEntry, CheckpointHeader, ModelCheckpoint, CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use network::{layer_kinds, probability, Network, PROBABILITY_CLAMP};
pub use predict::{ElementPrediction, Predictor, SELECTION_SEED};
pub use train::{
    encode_examples, fit, predict_scores, train, CalibrationSource, EncodedExamples, TrainOutcome, TrainReport,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("input shape: {0}")]
    Shape(String),
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("training failed at step {step}: {reason}")]
    Training { step: usize, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
