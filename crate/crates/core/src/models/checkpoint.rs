use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::seq2seq::{ModelConfig, Seq2SeqModel};
use crate::autodiff::Adam;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const FORMAT: &str = "igrl-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub query: Vec<usize>,
    pub response: Vec<usize>,
    pub log_prob: f64,
}

/// Self-describing JSON container for a generator and its training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub param_names: Vec<String>,
    pub params: Vec<Tensor>,
    pub vocab_hash: String,
    pub step: u64,
    pub seed: u64,
    #[serde(default)]
    pub manifest_hash: Option<String>,
    pub probe: Vec<ProbeEntry>,
    #[serde(default)]
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    /// Snapshots `model`, evaluating the probe batch so a restore can be
    /// verified bit for bit.
    pub fn capture(
        model: &Seq2SeqModel,
        vocab_hash: &str,
        step: u64,
        seed: u64,
        probe_batch: &[(Vec<usize>, Vec<usize>)],
    ) -> Result<Self> {
        let probe = probe_batch
            .iter()
            .map(|(q, r)| {
                Ok(ProbeEntry {
                    query: q.clone(),
                    response: r.clone(),
                    log_prob: model.sequence_log_prob(q, r)?.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Checkpoint {
            format: FORMAT.to_owned(),
            config: model.config().clone(),
            param_names: model.params().names().to_vec(),
            params: model.params().tensors().cloned().collect(),
            vocab_hash: vocab_hash.to_owned(),
            step,
            seed,
            manifest_hash: None,
            probe,
            optimizer: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if ckpt.format != FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format `{}`", ckpt.format)));
        }
        Ok(ckpt)
    }

    /// Rebuilds the model, refusing a different vocabulary and verifying the
    /// stored probe log-probabilities exactly.
    pub fn restore(&self, vocab_hash: &str) -> Result<Seq2SeqModel> {
        if self.vocab_hash != vocab_hash {
            return Err(Error::VocabularyMismatch {
                expected: self.vocab_hash.clone(),
                found: vocab_hash.to_owned(),
            });
        }
        let mut model = Seq2SeqModel::zeroed(self.config.clone())?;
        model.load_params(&self.param_names, self.params.clone())?;
        for p in &self.probe {
            let (lp, _) = model.sequence_log_prob(&p.query, &p.response)?;
            if lp.to_bits() != p.log_prob.to_bits() {
                return Err(Error::ProbeMismatch);
            }
        }
        Ok(model)
    }
}
