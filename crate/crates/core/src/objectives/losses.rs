//! Loss terms of the hybrid objective
//! `L = L_mle + alpha * L_smo + beta * L_rl` and their parameter gradients.

use serde::{Deserialize, Serialize};

use super::config::RlPositions;
use super::sampling::SamplingTrajectory;
use crate::autodiff::{Eval, Gradients, Ops, Tape};
use crate::corpus::BigramTable;
use crate::error::Result;
use crate::models::{Seq2SeqModel, StyleClassifier};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mle: f64,
    pub smo: f64,
    pub rl: f64,
    pub hybrid: f64,
    pub mean_reward: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.mle, self.smo, self.rl, self.hybrid, self.mean_reward]
            .iter()
            .all(|x| x.is_finite())
    }
}

pub fn hybrid_loss(mle: f64, smo: f64, rl: f64, alpha: f64, beta: f64) -> LossBreakdown {
    LossBreakdown {
        mle,
        smo,
        rl,
        hybrid: mle + alpha * smo + beta * rl,
        mean_reward: 0.0,
    }
}

/// `-(r - b) * sum log p(y_i | y_<i, X)` over the selected positions.
pub fn rl_loss(trajectory: &SamplingTrajectory, reward: f64, baseline: f64, positions: RlPositions) -> f64 {
    let log_prob: f64 = trajectory
        .step_log_probs
        .iter()
        .zip(&trajectory.freed_mask)
        .filter(|(_, &freed)| positions == RlPositions::All || freed)
        .map(|(lp, _)| lp)
        .sum();
    -(reward - baseline) * log_prob
}

/// Classifier score of `target` for the trajectory's content tokens. A
/// trajectory with no content tokens expresses no style and scores 0.
pub fn reward(classifier: &StyleClassifier, trajectory: &SamplingTrajectory, target: usize) -> f64 {
    let surface = trajectory.surface_ids();
    if surface.is_empty() {
        return 0.0;
    }
    classifier.score(&surface).map(|p| p[target]).unwrap_or(0.0)
}

/// Teacher-forced negative log-likelihood.
pub fn mle_loss(model: &Seq2SeqModel, query: &[usize], reference: &[usize]) -> Result<f64> {
    Ok(-model.sequence_log_prob(query, reference)?.0)
}

/// Cross-entropy of each step's prediction against the corpus bigram
/// successor distribution of the previous reference token, from the second
/// position on. Steps whose predecessor never starts a bigram add nothing.
pub fn smoothing_loss(model: &Seq2SeqModel, query: &[usize], reference: &[usize], bigrams: &BigramTable) -> Result<f64> {
    let mut ev = Eval::new(model.params());
    let enc = model.encode_with(&mut ev, query)?;
    let rows = model.teacher_forced_with(&mut ev, &enc, reference)?;
    let mut total = 0.0;
    for i in 1..reference.len() {
        for (v, f) in bigrams.successor_distribution(reference[i - 1]) {
            total -= f * rows[i].data()[v];
        }
    }
    Ok(total)
}

/// Per-component weights for [`pair_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mle: f64,
    pub smo: f64,
    pub rl: f64,
}

impl LossWeights {
    pub fn hybrid(alpha: f64, beta: f64) -> Self {
        LossWeights { mle: 1.0, smo: alpha, rl: beta }
    }
}

/// The sampled side of one training pair: its trajectory and reward.
#[derive(Debug, Clone, Copy)]
pub struct RlTerm<'a> {
    pub trajectory: &'a SamplingTrajectory,
    pub reward: f64,
    pub baseline: f64,
    pub positions: RlPositions,
}

/// Component values for one pair plus the gradient of their weighted sum,
/// accumulated into `grads` after multiplying by `scale`. Without a bigram
/// table the smoothing term is left out.
#[allow(clippy::too_many_arguments)]
pub fn pair_gradients(
    model: &Seq2SeqModel,
    query: &[usize],
    reference: &[usize],
    rl: Option<RlTerm<'_>>,
    bigrams: Option<&BigramTable>,
    weights: LossWeights,
    scale: f64,
    grads: &mut Gradients,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new(model.params());
    let enc = model.encode_with(&mut tape, query)?;
    let rows = model.teacher_forced_with(&mut tape, &enc, reference)?;

    let mut parts = Vec::new();
    let mut mle_nodes = Vec::with_capacity(rows.len());
    for (row, &y) in rows.iter().zip(reference) {
        mle_nodes.push(tape.weighted_sum(row, &[(y, -1.0)]));
    }
    let mle = sum_nodes(&mut tape, &mle_nodes);
    parts.push((mle, weights.mle));

    let mut smo_nodes = Vec::new();
    for i in 1..reference.len() {
        let Some(bigrams) = bigrams else { break };
        let dist: Vec<(usize, f64)> = bigrams
            .successor_distribution(reference[i - 1])
            .into_iter()
            .map(|(v, f)| (v, -f))
            .collect();
        if !dist.is_empty() {
            smo_nodes.push(tape.weighted_sum(&rows[i], &dist));
        }
    }
    let smo = sum_nodes(&mut tape, &smo_nodes);
    parts.push((smo, weights.smo));

    let mut mean_reward = 0.0;
    let rl_node = match rl {
        Some(term) if !term.trajectory.is_empty() => {
            mean_reward = term.reward;
            let advantage = term.reward - term.baseline;
            let traj_rows = model.teacher_forced_with(&mut tape, &enc, &term.trajectory.tokens)?;
            let nodes: Vec<_> = traj_rows
                .iter()
                .zip(&term.trajectory.tokens)
                .zip(&term.trajectory.freed_mask)
                .filter(|(_, &freed)| term.positions == RlPositions::All || freed)
                .map(|((row, &t), _)| tape.weighted_sum(row, &[(t, -advantage)]))
                .collect();
            Some(sum_nodes(&mut tape, &nodes))
        }
        _ => None,
    };
    if let Some(node) = rl_node {
        parts.push((node, weights.rl));
    }

    let scaled: Vec<_> = parts.iter().map(|(n, w)| tape.scale(n, *w)).collect();
    let total = sum_nodes(&mut tape, &scaled);
    tape.backward(&total, scale, grads);

    let value = |n: &crate::autodiff::Var| tape.value(n).scalar();
    let (mle, smo) = (value(&parts[0].0), value(&parts[1].0));
    let rl = rl_node.map(|n| value(&n)).unwrap_or(0.0);
    Ok(LossBreakdown {
        mle,
        smo,
        rl,
        hybrid: mle + weights.smo * smo + weights.rl * rl,
        mean_reward,
    })
}

fn sum_nodes<O: Ops>(ops: &mut O, nodes: &[O::Node]) -> O::Node {
    match nodes.split_first() {
        None => ops.constant(crate::tensor::Tensor::zeros(1, 1)),
        Some((first, rest)) => rest.iter().fold(first.clone(), |acc, n| ops.add(&acc, n)),
    }
}
