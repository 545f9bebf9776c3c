use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use igrl::corpus::SyntheticSpec;
use igrl::evalsuite::ConflictMatrix;
use igrl::models::{ClassifierConfig, ModelConfig};
use igrl::objectives::TrainingConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Artifact locations, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactPaths {
    pub styles: PathBuf,
    pub train: PathBuf,
    pub heldout: PathBuf,
    pub ground_truth: PathBuf,
    pub vocab: PathBuf,
    pub lexicon: PathBuf,
    pub thresholds: PathBuf,
    pub classifier: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Default for ArtifactPaths {
    fn default() -> Self {
        ArtifactPaths {
            styles: "corpus/styles.json".into(),
            train: "corpus/train.jsonl".into(),
            heldout: "corpus/heldout.jsonl".into(),
            ground_truth: "corpus/ground_truth.tsv".into(),
            vocab: "lexicon/vocab.json".into(),
            lexicon: "lexicon/lexicon.tsv".into(),
            thresholds: "lexicon/thresholds.json".into(),
            classifier: "classifier/classifier.json".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
        }
    }
}

/// Generator dimensions; the vocabulary size comes from the built vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_decode_len: usize,
}

impl ModelShape {
    pub fn config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: self.embedding_dim,
            hidden_dim: self.hidden_dim,
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            vocab_size,
            max_decode_len: self.max_decode_len,
        }
    }
}

fn default_max_vocab() -> usize {
    200
}

fn default_heldout_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub seed: u64,
    pub styles: Vec<String>,
    #[serde(default)]
    pub paths: ArtifactPaths,
    pub model: ModelShape,
    pub training: TrainingConfig,
    pub synthetic: SyntheticSpec,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default = "default_max_vocab")]
    pub max_vocab: usize,
    #[serde(default = "default_heldout_fraction")]
    pub heldout_fraction: f64,
    #[serde(default)]
    pub conflicts: ConflictMatrix,
}

impl ExperimentManifest {
    /// The desk-scale synthetic setup: two styles, embedding 32, hidden 64.
    pub fn desk_scale(seed: u64) -> Self {
        let synthetic = SyntheticSpec {
            corpus_size: 20_000,
            ..SyntheticSpec::desk_scale(seed)
        };
        ExperimentManifest {
            seed,
            styles: vec!["male".into(), "female".into()],
            paths: ArtifactPaths::default(),
            model: ModelShape {
                embedding_dim: 32,
                hidden_dim: 64,
                encoder_layers: 2,
                decoder_layers: 2,
                max_decode_len: 20,
            },
            training: TrainingConfig {
                target_style: "male".into(),
                beta: 5.0,
                rl_epochs: 2,
                seed,
                ..TrainingConfig::default()
            },
            synthetic,
            classifier: ClassifierConfig::default(),
            max_vocab: default_max_vocab(),
            heldout_fraction: default_heldout_fraction(),
            conflicts: ConflictMatrix::gender(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.styles.len() != self.synthetic.n_styles {
            bail!(
                "manifest lists {} styles but the synthetic spec plants {}",
                self.styles.len(),
                self.synthetic.n_styles
            );
        }
        if !self.styles.contains(&self.training.target_style) {
            bail!("target style `{}` is not in the style list", self.training.target_style);
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            bail!("heldout_fraction {} not in (0, 1)", self.heldout_fraction);
        }
        self.training.validate()?;
        self.model.config(self.max_vocab).validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Per-stage seed: the first eight bytes of SHA-256 over the global seed and
/// the stage name.
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
