//! Generators for synthetic graphs and corpora with known ground truth.

mod corpus;
mod kg;

pub use corpus::{
    type_pair_label, CorpusSpec, DocTruth, GroundTruth, LabelSource, SyntheticCorpus,
};
pub use kg::{
    BlockKgSpec, OrderingKgSpec, SyntheticKg, BACKWARD, CROSS_GROUP, FORWARD, SAME_GROUP,
};
