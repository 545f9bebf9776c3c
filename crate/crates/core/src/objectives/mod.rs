//! Constrained sampling, the hybrid training objective and the training
//! loops that optimize it.

mod config;
mod losses;
mod sampling;
mod train;

pub use config::{Mode, RlPositions, RlReferences, TrainingConfig};
pub use losses::{
    hybrid_loss, mle_loss, pair_gradients, reward, rl_loss, smoothing_loss, LossBreakdown, LossWeights, RlTerm,
};
pub use sampling::{constrained_sample, random_mask_sample, unconstrained_sample, SamplingTrajectory};
pub use train::{epoch_csv, pretrain, sample_trajectory, train_rl, write_epoch_csv, EpochLog, RlContext};
