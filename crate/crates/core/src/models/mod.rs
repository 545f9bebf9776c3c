//! The generation policy, the reward classifier and checkpoint persistence.

mod checkpoint;
mod classifier;
mod seq2seq;

pub use checkpoint::Checkpoint;
pub use classifier::{ClassifierConfig, StyleClassifier};
pub use seq2seq::{
    exp_all, sample_categorical, sample_top_k, top_k_indices, DecoderState, EncoderOutput, ModelConfig,
    Seq2SeqModel, INIT_RANGE,
};
