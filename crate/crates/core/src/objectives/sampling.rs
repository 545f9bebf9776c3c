//! Trajectory samplers for policy-gradient training.

use rand::Rng;

use crate::corpus::{Vocabulary, EOS, SOS};
use crate::error::{Error, Result};
use crate::lexicon::StyleLexicon;
use crate::models::{exp_all, sample_categorical, Seq2SeqModel};

/// A sampled response with, per position, whether it was drawn from the
/// policy (`freed`) or copied from the reference, and its log-probability
/// under the policy given the sampled prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTrajectory {
    pub tokens: Vec<usize>,
    pub freed_mask: Vec<bool>,
    pub step_log_probs: Vec<f64>,
    pub reward: Option<f64>,
}

impl SamplingTrajectory {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn freed_count(&self) -> usize {
        self.freed_mask.iter().filter(|&&f| f).count()
    }

    /// Content tokens only, as handed to the reward classifier.
    pub fn surface_ids(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .copied()
            .filter(|&t| !Vocabulary::is_reserved(t))
            .collect()
    }
}

/// Walks the reference, sampling where `free(i, y_i)` holds and copying
/// otherwise. The sampled prefix conditions every later step.
fn guided_sample<R: Rng>(
    model: &Seq2SeqModel,
    query: &[usize],
    reference: &[usize],
    rng: &mut R,
    mut free: impl FnMut(usize, usize, &mut R) -> bool,
) -> Result<SamplingTrajectory> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference"));
    }
    let mut state = model.start(query)?;
    let mut prev = SOS;
    let n = reference.len();
    let mut traj = SamplingTrajectory {
        tokens: Vec::with_capacity(n),
        freed_mask: Vec::with_capacity(n),
        step_log_probs: Vec::with_capacity(n),
        reward: None,
    };
    for (i, &y) in reference.iter().enumerate() {
        let (log_probs, next) = model.step_log_probs(&state, prev)?;
        let freed = free(i, y, rng);
        let token = if freed {
            sample_categorical(&exp_all(&log_probs), rng)
        } else {
            y
        };
        traj.tokens.push(token);
        traj.freed_mask.push(freed);
        traj.step_log_probs.push(log_probs[token]);
        state = next;
        prev = token;
    }
    Ok(traj)
}

/// Resamples exactly the reference positions whose token is stylistic for
/// the reference style `style`; every other position (and `<eos>`) is copied.
pub fn constrained_sample<R: Rng>(
    model: &Seq2SeqModel,
    query: &[usize],
    reference: &[usize],
    style: usize,
    lexicon: &StyleLexicon,
    rng: &mut R,
) -> Result<SamplingTrajectory> {
    if lexicon.vocab_size() != model.config().vocab_size {
        return Err(Error::Config(format!(
            "lexicon covers {} tokens but the model has {}",
            lexicon.vocab_size(),
            model.config().vocab_size
        )));
    }
    if let Some(&id) = reference.iter().find(|&&t| t >= lexicon.vocab_size()) {
        return Err(Error::TokenOutOfRange {
            id,
            size: lexicon.vocab_size(),
        });
    }
    if style >= lexicon.n_styles() {
        return Err(Error::Config(format!("style id {style} out of range")));
    }
    guided_sample(model, query, reference, rng, |_, y, _| lexicon.is_stylistic(y, style))
}

/// Frees each non-`<eos>` position independently with probability `p`.
pub fn random_mask_sample<R: Rng>(
    model: &Seq2SeqModel,
    query: &[usize],
    reference: &[usize],
    p: f64,
    rng: &mut R,
) -> Result<SamplingTrajectory> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("mask probability {p} not in (0, 1)")));
    }
    guided_sample(model, query, reference, rng, |_, y, rng| y != EOS && rng.gen_bool(p))
}

/// Samples freely from the policy until `<eos>` (kept as the final token)
/// or `max_len` tokens.
pub fn unconstrained_sample<R: Rng>(
    model: &Seq2SeqModel,
    query: &[usize],
    max_len: usize,
    rng: &mut R,
) -> Result<SamplingTrajectory> {
    let mut state = model.start(query)?;
    let mut prev = SOS;
    let mut traj = SamplingTrajectory {
        tokens: Vec::new(),
        freed_mask: Vec::new(),
        step_log_probs: Vec::new(),
        reward: None,
    };
    for _ in 0..max_len {
        let (log_probs, next) = model.step_log_probs(&state, prev)?;
        let token = sample_categorical(&exp_all(&log_probs), rng);
        traj.tokens.push(token);
        traj.freed_mask.push(true);
        traj.step_log_probs.push(log_probs[token]);
        if token == EOS {
            break;
        }
        state = next;
        prev = token;
    }
    Ok(traj)
}
