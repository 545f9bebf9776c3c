//! Stage-based experiment pipeline: synthetic data, lexicon, reward
//! classifier, MLE pretraining, RL training, generation and evaluation.
//! Every stage reads its inputs from and writes its outputs to a run
//! directory described by an [`ExperimentManifest`].

mod artifacts;
mod manifest;
mod pipeline;

pub use artifacts::{require, stamp, stamp_path, Stamp};
pub use manifest::{derive_seed, ArtifactPaths, ExperimentManifest, ModelShape};
pub use pipeline::{Evaluation, Pipeline, Stage, StageError, PRETRAINED};
