//! Information-guided reinforcement learning for stylistic dialogue
//! generation: PMI style lexicons, constrained trajectory sampling, a hybrid
//! MLE / bigram-smoothing / REINFORCE objective and automatic evaluation.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod evalsuite;
pub mod lexicon;
pub mod models;
pub mod objectives;
pub mod tensor;

pub use error::{Error, Result};
