//! Attention encoder-decoder policy.
//!
//! Stacked LSTM encoder and decoder. At each decoder step the input is the
//! previous token's embedding concatenated with the previous attention
//! context; the top decoder state attends over encoder states with a
//! bilinear score `h_dec W_a h_enc^T`, and `tanh(W_c [ctx; h] + b_c)` feeds
//! the output projection.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Eval, Ops, ParamId, ParamStore};
use crate::corpus::{EOS, SOS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Half-width of the uniform parameter initialization interval.
pub const INIT_RANGE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub vocab_size: usize,
    pub max_decode_len: usize,
}

impl ModelConfig {
    /// Published dimensions: 300-d embeddings, two 500-unit LSTM layers.
    pub fn published(vocab_size: usize) -> Self {
        ModelConfig {
            embedding_dim: 300,
            hidden_dim: 500,
            encoder_layers: 2,
            decoder_layers: 2,
            vocab_size,
            max_decode_len: 30,
        }
    }

    pub fn desk_scale(vocab_size: usize) -> Self {
        ModelConfig {
            embedding_dim: 32,
            hidden_dim: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            vocab_size,
            max_decode_len: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.embedding_dim,
            self.hidden_dim,
            self.encoder_layers,
            self.decoder_layers,
            self.vocab_size,
            self.max_decode_len,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("all model dimensions must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layout {
    embedding: ParamId,
    encoder: Vec<(ParamId, ParamId)>,
    decoder: Vec<(ParamId, ParamId)>,
    attention: ParamId,
    combine_w: ParamId,
    combine_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// Encoder output: one row per input position plus per-layer final states.
#[derive(Debug, Clone)]
pub struct EncoderOutput<N> {
    pub memory: N,
    pub final_h: Vec<N>,
    pub final_c: Vec<N>,
}

#[derive(Debug, Clone)]
pub struct DecoderState<N> {
    pub h: Vec<N>,
    pub c: Vec<N>,
    pub context: N,
    pub memory: N,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

fn lstm_cell<O: Ops>(
    ops: &mut O,
    (w, b): (ParamId, ParamId),
    x: &O::Node,
    h: &O::Node,
    c: &O::Node,
    hidden: usize,
) -> (O::Node, O::Node) {
    let w = ops.param(w);
    let b = ops.param(b);
    let xh = ops.concat_cols(&[x.clone(), h.clone()]);
    let z = ops.matmul(&xh, &w);
    let z = ops.add(&z, &b);
    let i = ops.slice_cols(&z, 0, hidden);
    let f = ops.slice_cols(&z, hidden, hidden);
    let g = ops.slice_cols(&z, 2 * hidden, hidden);
    let o = ops.slice_cols(&z, 3 * hidden, hidden);
    let i = ops.sigmoid(&i);
    let f = ops.sigmoid(&f);
    let g = ops.tanh(&g);
    let o = ops.sigmoid(&o);
    let fc = ops.mul(&f, c);
    let ig = ops.mul(&i, &g);
    let c_next = ops.add(&fc, &ig);
    let tc = ops.tanh(&c_next);
    let h_next = ops.mul(&o, &tc);
    (h_next, c_next)
}

impl Seq2SeqModel {
    /// Parameters drawn uniformly from `[-INIT_RANGE, INIT_RANGE]`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(config, |r, c| Tensor::uniform(r, c, INIT_RANGE, &mut rng))
    }

    /// Every parameter zero: the output distribution is uniform everywhere.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        Self::build(config, Tensor::zeros)
    }

    fn build(config: ModelConfig, mut init: impl FnMut(usize, usize) -> Tensor) -> Result<Self> {
        config.validate()?;
        let (e, h, v) = (config.embedding_dim, config.hidden_dim, config.vocab_size);
        let mut params = ParamStore::new();
        let embedding = params.add("embedding", init(v, e));
        let mut encoder = Vec::new();
        for l in 0..config.encoder_layers {
            let input = if l == 0 { e } else { h };
            let w = params.add(format!("encoder.{l}.w"), init(input + h, 4 * h));
            let b = params.add(format!("encoder.{l}.b"), init(1, 4 * h));
            encoder.push((w, b));
        }
        let mut decoder = Vec::new();
        for l in 0..config.decoder_layers {
            let input = if l == 0 { e + h } else { h };
            let w = params.add(format!("decoder.{l}.w"), init(input + h, 4 * h));
            let b = params.add(format!("decoder.{l}.b"), init(1, 4 * h));
            decoder.push((w, b));
        }
        let attention = params.add("attention.w", init(h, h));
        let combine_w = params.add("combine.w", init(2 * h, h));
        let combine_b = params.add("combine.b", init(1, h));
        let out_w = params.add("output.w", init(h, v));
        let out_b = params.add("output.b", init(1, v));
        Ok(Seq2SeqModel {
            config,
            params,
            layout: Layout {
                embedding,
                encoder,
                decoder,
                attention,
                combine_w,
                combine_b,
                out_w,
                out_b,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces all parameter values; shapes and names must match.
    pub fn load_params(&mut self, names: &[String], values: Vec<Tensor>) -> Result<()> {
        if names != self.params.names() || values.len() != self.params.len() {
            return Err(Error::Config("checkpoint parameter layout mismatch".into()));
        }
        for (id, value) in self.params.ids().collect::<Vec<_>>().into_iter().zip(values) {
            if value.shape() != self.params.get(id).shape() {
                return Err(Error::Config(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    self.params.name(id),
                    value.shape(),
                    self.params.get(id).shape()
                )));
            }
            *self.params.get_mut(id) = value;
        }
        Ok(())
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&t| t >= self.config.vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    pub fn encode_with<O: Ops>(&self, ops: &mut O, query: &[usize]) -> Result<EncoderOutput<O::Node>> {
        if query.is_empty() {
            return Err(Error::EmptyInput("query"));
        }
        self.check_ids(query)?;
        let hidden = self.config.hidden_dim;
        let emb = ops.param(self.layout.embedding);
        let mut inputs: Vec<O::Node> = query.iter().map(|&t| ops.select_row(&emb, t)).collect();
        let mut final_h = Vec::new();
        let mut final_c = Vec::new();
        for &cell in &self.layout.encoder {
            let mut h = ops.constant(Tensor::zeros(1, hidden));
            let mut c = ops.constant(Tensor::zeros(1, hidden));
            let mut outputs = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let (h2, c2) = lstm_cell(ops, cell, x, &h, &c, hidden);
                h = h2;
                c = c2;
                outputs.push(h.clone());
            }
            final_h.push(h);
            final_c.push(c);
            inputs = outputs;
        }
        let memory = ops.stack_rows(&inputs);
        Ok(EncoderOutput {
            memory,
            final_h,
            final_c,
        })
    }

    /// Decoder layer `l` starts from encoder layer `l`'s final state, or zeros
    /// when the encoder is shallower.
    pub fn initial_state_with<O: Ops>(&self, ops: &mut O, enc: &EncoderOutput<O::Node>) -> DecoderState<O::Node> {
        let hidden = self.config.hidden_dim;
        let mut h = Vec::new();
        let mut c = Vec::new();
        for l in 0..self.config.decoder_layers {
            match (enc.final_h.get(l), enc.final_c.get(l)) {
                (Some(eh), Some(ec)) => {
                    h.push(eh.clone());
                    c.push(ec.clone());
                }
                _ => {
                    h.push(ops.constant(Tensor::zeros(1, hidden)));
                    c.push(ops.constant(Tensor::zeros(1, hidden)));
                }
            }
        }
        DecoderState {
            h,
            c,
            context: ops.constant(Tensor::zeros(1, hidden)),
            memory: enc.memory.clone(),
        }
    }

    /// One decoder step; returns the 1xV log-distribution and the next state.
    pub fn step_with<O: Ops>(
        &self,
        ops: &mut O,
        state: &DecoderState<O::Node>,
        prev: usize,
    ) -> (O::Node, DecoderState<O::Node>) {
        let hidden = self.config.hidden_dim;
        let emb = ops.param(self.layout.embedding);
        let x = ops.select_row(&emb, prev);
        let mut input = ops.concat_cols(&[x, state.context.clone()]);
        let mut h = Vec::with_capacity(state.h.len());
        let mut c = Vec::with_capacity(state.c.len());
        for (l, &cell) in self.layout.decoder.iter().enumerate() {
            let (h2, c2) = lstm_cell(ops, cell, &input, &state.h[l], &state.c[l], hidden);
            input = h2.clone();
            h.push(h2);
            c.push(c2);
        }
        let top = input;
        let wa = ops.param(self.layout.attention);
        let query = ops.matmul(&top, &wa);
        let scores = ops.matmul_nt(&query, &state.memory);
        let weights = ops.softmax(&scores);
        let context = ops.matmul(&weights, &state.memory);
        let wc = ops.param(self.layout.combine_w);
        let bc = ops.param(self.layout.combine_b);
        let joined = ops.concat_cols(&[context.clone(), top]);
        let attn = ops.matmul(&joined, &wc);
        let attn = ops.add(&attn, &bc);
        let attn = ops.tanh(&attn);
        let wo = ops.param(self.layout.out_w);
        let bo = ops.param(self.layout.out_b);
        let logits = ops.matmul(&attn, &wo);
        let logits = ops.add(&logits, &bo);
        let log_probs = ops.log_softmax(&logits);
        (
            log_probs,
            DecoderState {
                h,
                c,
                context,
                memory: state.memory.clone(),
            },
        )
    }

    /// Teacher-forced log-distributions: step `i` is conditioned on `<sos>`
    /// followed by `inputs[..i]`. Returns one 1xV node per target position.
    pub fn teacher_forced_with<O: Ops>(
        &self,
        ops: &mut O,
        enc: &EncoderOutput<O::Node>,
        targets: &[usize],
    ) -> Result<Vec<O::Node>> {
        self.check_ids(targets)?;
        let mut state = self.initial_state_with(ops, enc);
        let mut prev = SOS;
        let mut out = Vec::with_capacity(targets.len());
        for &t in targets {
            let (lp, next) = self.step_with(ops, &state, prev);
            out.push(lp);
            state = next;
            prev = t;
        }
        Ok(out)
    }

    pub fn encode(&self, query: &[usize]) -> Result<EncoderOutput<Arc<Tensor>>> {
        self.encode_with(&mut Eval::new(&self.params), query)
    }

    pub fn start(&self, query: &[usize]) -> Result<DecoderState<Arc<Tensor>>> {
        let mut ev = Eval::new(&self.params);
        let enc = self.encode_with(&mut ev, query)?;
        Ok(self.initial_state_with(&mut ev, &enc))
    }

    /// Log-probabilities over the vocabulary for the next token.
    pub fn step_log_probs(
        &self,
        state: &DecoderState<Arc<Tensor>>,
        prev: usize,
    ) -> Result<(Vec<f64>, DecoderState<Arc<Tensor>>)> {
        self.check_ids(&[prev])?;
        let (lp, next) = self.step_with(&mut Eval::new(&self.params), state, prev);
        Ok((lp.data().to_vec(), next))
    }

    /// Next-token distribution (probabilities) and the next decoder state.
    pub fn decode_step(
        &self,
        state: &DecoderState<Arc<Tensor>>,
        prev: usize,
    ) -> Result<(Vec<f64>, DecoderState<Arc<Tensor>>)> {
        let (lp, next) = self.step_log_probs(state, prev)?;
        Ok((lp.into_iter().map(f64::exp).collect(), next))
    }

    /// Teacher-forced log-likelihood of `response` (which should end with
    /// `<eos>`): the total and the per-position terms.
    pub fn sequence_log_prob(&self, query: &[usize], response: &[usize]) -> Result<(f64, Vec<f64>)> {
        let mut ev = Eval::new(&self.params);
        let enc = self.encode_with(&mut ev, query)?;
        let rows = self.teacher_forced_with(&mut ev, &enc, response)?;
        let terms: Vec<f64> = rows
            .iter()
            .zip(response)
            .map(|(row, &t)| row.data()[t])
            .collect();
        Ok((terms.iter().sum(), terms))
    }

    /// Argmax decoding; ties go to the lowest id. Output excludes `<eos>`.
    pub fn greedy_decode(&self, query: &[usize], max_len: usize) -> Result<Vec<usize>> {
        self.top_k_sample_decode(query, 1, max_len, 0)
    }

    pub fn top_k_sample_decode(&self, query: &[usize], k: usize, max_len: usize, seed: u64) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.top_k_decode_logged(query, k, max_len, &mut rng, |_, _| ())?)
    }

    /// Top-k sampling from the renormalized `k` most probable tokens at each
    /// step. `observe` sees every step distribution and the emitted token.
    pub fn top_k_decode_logged<R: Rng>(
        &self,
        query: &[usize],
        k: usize,
        max_len: usize,
        rng: &mut R,
        mut observe: impl FnMut(&[f64], usize),
    ) -> Result<Vec<usize>> {
        let vocab = self.config.vocab_size;
        if k == 0 || k > vocab {
            return Err(Error::TopKOutOfRange { k, vocab });
        }
        let mut state = self.start(query)?;
        let mut prev = SOS;
        let mut out = Vec::new();
        for _ in 0..max_len {
            let (probs, next) = self.decode_step(&state, prev)?;
            let token = sample_top_k(&probs, k, rng);
            observe(&probs, token);
            if token == EOS {
                break;
            }
            out.push(token);
            state = next;
            prev = token;
        }
        Ok(out)
    }
}

/// Ids of the `k` most probable entries, ties to the lowest id.
pub fn top_k_indices(probs: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn sample_top_k<R: Rng>(probs: &[f64], k: usize, rng: &mut R) -> usize {
    let candidates = top_k_indices(probs, k);
    if candidates.len() == 1 {
        return candidates[0];
    }
    let mass: f64 = candidates.iter().map(|&i| probs[i]).sum();
    let mut u = rng.gen::<f64>() * mass;
    for &i in &candidates {
        u -= probs[i];
        if u < 0.0 {
            return i;
        }
    }
    *candidates.last().expect("k >= 1")
}

/// Inverse-CDF draw from a full distribution.
pub fn sample_categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>() * probs.iter().sum::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        u -= p;
        if u < 0.0 {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Probabilities from log-probabilities.
pub fn exp_all(log_probs: &[f64]) -> Vec<f64> {
    log_probs.iter().map(|&x| x.exp()).collect()
}
