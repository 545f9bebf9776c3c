//! Style classifier used as the reward agent: unigram and bigram count
//! features feeding a linear softmax layer.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 150,
            learning_rate: 0.05,
            l2: 1e-4,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleClassifier {
    style_names: Vec<String>,
    vocab_size: usize,
    /// bigram (u, v) -> feature index, offset past the unigram block
    #[serde(with = "bigram_index")]
    bigrams: BTreeMap<(usize, usize), usize>,
    weights: Vec<f64>,
    bias: Vec<f64>,
    held_out_accuracy: Option<f64>,
}

/// JSON object keys must be strings, so the index travels as `[u, v, i]`
/// triples.
mod bigram_index {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<(usize, usize), usize>, s: S) -> Result<S::Ok, S::Error> {
        let triples: Vec<[usize; 3]> = map.iter().map(|(&(u, v), &i)| [u, v, i]).collect();
        triples.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), usize>, D::Error> {
        let triples = Vec::<[usize; 3]>::deserialize(d)?;
        Ok(triples.into_iter().map(|[u, v, i]| ((u, v), i)).collect())
    }
}

/// Sparse feature counts for a response. Reserved ids are dropped before
/// feature extraction, so the classifier never sees them.
fn features(
    response: &[usize],
    vocab_size: usize,
    bigrams: &BTreeMap<(usize, usize), usize>,
) -> Vec<(usize, f64)> {
    let content: Vec<usize> = response
        .iter()
        .copied()
        .filter(|&t| !Vocabulary::is_reserved(t) && t < vocab_size)
        .collect();
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &t in &content {
        *counts.entry(t).or_default() += 1.0;
    }
    for w in content.windows(2) {
        if let Some(&f) = bigrams.get(&(w[0], w[1])) {
            *counts.entry(f).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

impl StyleClassifier {
    /// Trains on `(response ids, style id)` examples. A seeded shuffle holds
    /// out `holdout_fraction` of the data for the reported accuracy.
    pub fn train(
        examples: &[(Vec<usize>, usize)],
        style_names: &[String],
        vocab_size: usize,
        config: &ClassifierConfig,
    ) -> Result<Self> {
        let n_styles = style_names.len();
        let mut present = vec![false; n_styles];
        for (_, s) in examples {
            if *s >= n_styles {
                return Err(Error::Config(format!("style id {s} out of range")));
            }
            present[*s] = true;
        }
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::Config("classifier training needs at least two styles".into()));
        }

        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let n_hold = ((examples.len() as f64) * config.holdout_fraction).round() as usize;
        let n_hold = n_hold.min(examples.len().saturating_sub(1));
        let (held, train) = order.split_at(n_hold);

        let mut bigrams = BTreeMap::new();
        for &i in train {
            let content: Vec<usize> = examples[i]
                .0
                .iter()
                .copied()
                .filter(|&t| !Vocabulary::is_reserved(t) && t < vocab_size)
                .collect();
            for w in content.windows(2) {
                let next = vocab_size + bigrams.len();
                bigrams.entry((w[0], w[1])).or_insert(next);
            }
        }
        let n_features = vocab_size + bigrams.len();
        let mut model = StyleClassifier {
            style_names: style_names.to_vec(),
            vocab_size,
            bigrams,
            weights: vec![0.0; n_features * n_styles],
            bias: vec![0.0; n_styles],
            held_out_accuracy: None,
        };

        let feats: Vec<(Vec<(usize, f64)>, usize)> = train
            .iter()
            .map(|&i| (model.features(&examples[i].0), examples[i].1))
            .collect();
        model.fit(&feats, config);

        if !held.is_empty() {
            let correct = held
                .iter()
                .filter(|&&i| model.predict(&examples[i].0).ok() == Some(examples[i].1))
                .count();
            model.held_out_accuracy = Some(correct as f64 / held.len() as f64);
        }
        Ok(model)
    }

    /// Full-batch softmax regression with adaptive moments and L2.
    fn fit(&mut self, data: &[(Vec<(usize, f64)>, usize)], config: &ClassifierConfig) {
        let k = self.style_names.len();
        let n = data.len().max(1) as f64;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m_w = vec![0.0; self.weights.len()];
        let mut v_w = vec![0.0; self.weights.len()];
        let mut m_b = vec![0.0; k];
        let mut v_b = vec![0.0; k];
        for epoch in 1..=config.epochs {
            let mut g_w: Vec<f64> = self.weights.iter().map(|w| config.l2 * w).collect();
            let mut g_b = vec![0.0; k];
            for (feats, y) in data {
                let p = self.distribution(feats);
                for s in 0..k {
                    let d = (p[s] - f64::from(u8::from(s == *y))) / n;
                    g_b[s] += d;
                    for &(f, x) in feats {
                        g_w[f * k + s] += d * x;
                    }
                }
            }
            let bc1 = 1.0 - f64::powi(b1, epoch as i32);
            let bc2 = 1.0 - f64::powi(b2, epoch as i32);
            let lr = config.learning_rate;
            let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
                }
            };
            apply(&mut self.weights, &g_w, &mut m_w, &mut v_w);
            apply(&mut self.bias, &g_b, &mut m_b, &mut v_b);
        }
    }

    fn features(&self, response: &[usize]) -> Vec<(usize, f64)> {
        features(response, self.vocab_size, &self.bigrams)
    }

    fn distribution(&self, feats: &[(usize, f64)]) -> Vec<f64> {
        let k = self.style_names.len();
        let mut logits = self.bias.clone();
        for &(f, x) in feats {
            for s in 0..k {
                logits[s] += self.weights[f * k + s] * x;
            }
        }
        softmax(&logits)
    }

    pub fn style_names(&self) -> &[String] {
        &self.style_names
    }

    pub fn n_styles(&self) -> usize {
        self.style_names.len()
    }

    pub fn held_out_accuracy(&self) -> Option<f64> {
        self.held_out_accuracy
    }

    /// Distribution over styles for a response.
    pub fn score(&self, response: &[usize]) -> Result<Vec<f64>> {
        if response.iter().all(|&t| Vocabulary::is_reserved(t)) {
            return Err(Error::EmptyInput("response"));
        }
        Ok(self.distribution(&self.features(response)))
    }

    /// Style id with the highest score; ties go to the lowest id.
    pub fn predict(&self, response: &[usize]) -> Result<usize> {
        let p = self.score(response)?;
        Ok(super::seq2seq::top_k_indices(&p, 1)[0])
    }

    pub fn accuracy(&self, examples: &[(Vec<usize>, usize)]) -> f64 {
        let correct = examples
            .iter()
            .filter(|(r, s)| self.predict(r).ok() == Some(*s))
            .count();
        correct as f64 / examples.len().max(1) as f64
    }
}
