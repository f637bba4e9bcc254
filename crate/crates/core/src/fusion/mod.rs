//! Fusion of context and relation vectors, the relation classifier and
//! its training loop.

mod classifier;
mod metrics;
mod train;

use std::path::Path;

use thiserror::Error;

use crate::binio::Truncated;
use crate::encoder::EncoderError;

pub use classifier::{softmax, FusionClassifier, FusionMode, FUSE_MAGIC};
pub use metrics::{score_predictions, LabelMetrics, ReMetrics};
pub use train::{
    evaluate_re, evaluate_re_detailed, predict, train_re, EpochRecord, KgeLookup, Prediction,
    ReEvaluation, ReTrainConfig, TrainedRe,
};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("training documents carry no labels")]
    EmptyLabelVocab,
    #[error("label `{0}` is not in the classifier's label vocabulary")]
    UnknownLabel(String),
    #[error("{what} has dimension {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no documents to evaluate")]
    EmptyDocs,
    #[error("training diverged in epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },
    #[error("invalid fusion configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("bad magic {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FusionError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> FusionError + '_ {
        move |source| FusionError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<Truncated> for FusionError {
    fn from(t: Truncated) -> Self {
        FusionError::Truncated { offset: t.offset }
    }
}
