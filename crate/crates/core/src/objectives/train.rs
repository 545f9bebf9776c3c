//! MLE pretraining and hybrid-objective RL training loops.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Mode, RlReferences, TrainingConfig};
use super::losses::{pair_gradients, reward, LossBreakdown, LossWeights, RlTerm};
use super::sampling::{constrained_sample, random_mask_sample, unconstrained_sample, SamplingTrajectory};
use crate::autodiff::Adam;
use crate::corpus::{BigramTable, EncodedPair};
use crate::error::{Error, Result};
use crate::lexicon::StyleLexicon;
use crate::models::{Seq2SeqModel, StyleClassifier};

/// Per-epoch means over training pairs. `mean_reward` averages over the
/// pairs that received a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mle: f64,
    pub smo: f64,
    pub rl: f64,
    pub hybrid: f64,
    pub mean_reward: f64,
}

impl EpochLog {
    pub fn breakdown(&self) -> LossBreakdown {
        LossBreakdown {
            mle: self.mle,
            smo: self.smo,
            rl: self.rl,
            hybrid: self.hybrid,
            mean_reward: self.mean_reward,
        }
    }
}

pub fn epoch_csv(logs: &[EpochLog]) -> String {
    let mut out = String::from("epoch,mle,smo,rl,hybrid,mean_reward\n");
    for l in logs {
        let _ = writeln!(out, "{},{},{},{},{},{}", l.epoch, l.mle, l.smo, l.rl, l.hybrid, l.mean_reward);
    }
    out
}

pub fn write_epoch_csv(path: &Path, logs: &[EpochLog]) -> Result<()> {
    std::fs::write(path, epoch_csv(logs)).map_err(|e| Error::io(path, e))
}

/// Everything RL training reads besides the model and corpus.
#[derive(Debug, Clone, Copy)]
pub struct RlContext<'a> {
    pub lexicon: &'a StyleLexicon,
    pub classifier: &'a StyleClassifier,
    pub bigrams: &'a BigramTable,
}

fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Optimizes the teacher-forced MLE loss. Returns the mean per-pair loss of
/// each epoch, measured on the parameters each batch saw.
pub fn pretrain(
    model: &mut Seq2SeqModel,
    optimizer: &mut Adam,
    corpus: &[EncodedPair],
    config: &TrainingConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if config.pretrain_epochs == 0 {
        return Err(Error::Config("pretrain_epochs must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weights = LossWeights { mle: 1.0, smo: 0.0, rl: 0.0 };
    let mut losses = Vec::with_capacity(config.pretrain_epochs);
    for _ in 0..config.pretrain_epochs {
        let mut total = 0.0;
        for batch in batches(corpus.len(), config.batch_size, &mut rng) {
            let mut grads = model.params().zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                let pair = &corpus[i];
                let b = pair_gradients(model, &pair.query, &pair.response, None, None, weights, scale, &mut grads)?;
                total += b.mle;
            }
            optimizer.update(model.params_mut(), &grads);
        }
        losses.push(total / corpus.len() as f64);
    }
    Ok(losses)
}

/// Draws a trajectory for `pair` with the sampler selected by `mode`.
pub fn sample_trajectory<R: Rng>(
    model: &Seq2SeqModel,
    pair: &EncodedPair,
    lexicon: &StyleLexicon,
    config: &TrainingConfig,
    rng: &mut R,
) -> Result<SamplingTrajectory> {
    match config.mode {
        Mode::IgRl => constrained_sample(model, &pair.query, &pair.response, pair.style, lexicon, rng),
        Mode::RandomMask => random_mask_sample(model, &pair.query, &pair.response, config.random_mask_p, rng),
        Mode::Unconstrained => unconstrained_sample(model, &pair.query, model.config().max_decode_len, rng),
    }
}

/// Trains the generator for `config.target_style` on the hybrid objective,
/// over all references or only the target style's ones. Each batch samples trajectories from the current parameters, scores them
/// with the classifier and takes one optimizer step on the batch-mean loss.
pub fn train_rl(
    model: &mut Seq2SeqModel,
    optimizer: &mut Adam,
    corpus: &[EncodedPair],
    ctx: RlContext<'_>,
    config: &TrainingConfig,
) -> Result<Vec<EpochLog>> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let target = ctx
        .classifier
        .style_names()
        .iter()
        .position(|n| *n == config.target_style)
        .ok_or_else(|| Error::UnknownStyle(config.target_style.clone()))?;
    let pool: Vec<&EncodedPair> = match config.rl_references {
        RlReferences::All => corpus.iter().collect(),
        RlReferences::TargetStyle => corpus.iter().filter(|p| p.style == target).collect(),
    };
    if pool.is_empty() {
        return Err(Error::EmptyStyle(config.target_style.clone()));
    }
    let weights = LossWeights::hybrid(config.alpha, config.beta);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut logs = Vec::with_capacity(config.rl_epochs);

    for epoch in 1..=config.rl_epochs {
        let mut sum = LossBreakdown::default();
        let mut rewarded = 0usize;
        for batch in batches(pool.len(), config.batch_size, &mut rng) {
            let mut trajectories = Vec::with_capacity(batch.len());
            for &i in &batch {
                let pair = pool[i];
                let sampled = if config.beta > 0.0 {
                    let mut t = sample_trajectory(model, pair, ctx.lexicon, config, &mut rng)?;
                    t.reward = Some(reward(ctx.classifier, &t, target));
                    Some(t)
                } else {
                    None
                };
                trajectories.push(sampled);
            }

            let mut grads = model.params().zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for (&i, traj) in batch.iter().zip(&trajectories) {
                let pair = pool[i];
                let term = traj.as_ref().map(|t| RlTerm {
                    trajectory: t,
                    reward: t.reward.unwrap_or(0.0),
                    baseline: config.baseline_b,
                    positions: config.rl_positions,
                });
                let b = pair_gradients(
                    model,
                    &pair.query,
                    &pair.response,
                    term,
                    Some(ctx.bigrams),
                    weights,
                    scale,
                    &mut grads,
                )?;
                sum.mle += b.mle;
                sum.smo += b.smo;
                sum.rl += b.rl;
                sum.hybrid += b.hybrid;
                if let Some(r) = traj.as_ref().and_then(|t| t.reward) {
                    sum.mean_reward += r;
                    rewarded += 1;
                }
            }
            optimizer.update(model.params_mut(), &grads);
        }
        let n = pool.len() as f64;
        logs.push(EpochLog {
            epoch,
            mle: sum.mle / n,
            smo: sum.smo / n,
            rl: sum.rl / n,
            hybrid: sum.hybrid / n,
            mean_reward: if rewarded > 0 { sum.mean_reward / rewarded as f64 } else { 0.0 },
        });
    }
    Ok(logs)
}
