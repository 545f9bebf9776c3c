use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sampler produces RL trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// PMI-constrained sampling: only stylistic reference positions are
    /// resampled.
    #[serde(rename = "IG_RL")]
    IgRl,
    /// Free sampling of the whole response.
    #[serde(rename = "UNCONSTRAINED_RL")]
    Unconstrained,
    /// Positions resampled independently with a fixed probability.
    #[serde(rename = "RANDOM_MASK")]
    RandomMask,
}

impl Mode {
    pub fn flag(self) -> &'static str {
        match self {
            Mode::IgRl => "ig-rl",
            Mode::Unconstrained => "unconstrained",
            Mode::RandomMask => "random-mask",
        }
    }

    pub fn from_flag(flag: &str) -> Result<Self> {
        match flag {
            "ig-rl" => Ok(Mode::IgRl),
            "unconstrained" => Ok(Mode::Unconstrained),
            "random-mask" => Ok(Mode::RandomMask),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected ig-rl, unconstrained or random-mask)"
            ))),
        }
    }
}

/// Which references feed RL batches when training the generator for the
/// target style.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlReferences {
    #[default]
    All,
    TargetStyle,
}

/// Positions whose log-probabilities enter the REINFORCE sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlPositions {
    #[default]
    All,
    FreedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub baseline_b: f64,
    pub top_k: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub rl_epochs: usize,
    pub target_style: String,
    pub mode: Mode,
    pub random_mask_p: f64,
    pub seed: u64,
    pub rl_references: RlReferences,
    pub rl_positions: RlPositions,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 0.2,
            beta: 0.25,
            baseline_b: 0.3,
            top_k: 20,
            learning_rate: 1e-3,
            batch_size: 64,
            pretrain_epochs: 3,
            rl_epochs: 3,
            target_style: String::new(),
            mode: Mode::IgRl,
            random_mask_p: 0.2,
            seed: 0,
            rl_references: RlReferences::All,
            rl_positions: RlPositions::All,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail(format!("alpha {} and beta {} must be >= 0", self.alpha, self.beta));
        }
        if !(0.0..=1.0).contains(&self.baseline_b) {
            return fail(format!("baseline_b {} not in [0, 1]", self.baseline_b));
        }
        if !(self.random_mask_p > 0.0 && self.random_mask_p < 1.0) {
            return fail(format!("random_mask_p {} not in (0, 1)", self.random_mask_p));
        }
        if self.top_k == 0 || self.batch_size == 0 {
            return fail("top_k and batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = TrainingConfig::default();
        assert_eq!((c.baseline_b, c.alpha, c.beta), (0.3, 0.2, 0.25));
        assert_eq!((c.top_k, c.batch_size, c.pretrain_epochs), (20, 64, 3));
        assert_eq!((c.learning_rate, c.random_mask_p), (1e-3, 0.2));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn json_keys_mirror_fields() {
        let json = serde_json::to_value(TrainingConfig::default()).unwrap();
        for key in [
            "alpha", "beta", "baseline_b", "top_k", "learning_rate", "batch_size",
            "pretrain_epochs", "rl_epochs", "target_style", "mode", "random_mask_p", "seed",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["mode"], "IG_RL");
        let partial: TrainingConfig = serde_json::from_str(r#"{"mode": "RANDOM_MASK", "beta": 0}"#).unwrap();
        assert_eq!(partial.mode, Mode::RandomMask);
        assert_eq!(partial.beta, 0.0);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            TrainingConfig { alpha: -0.1, ..Default::default() },
            TrainingConfig { baseline_b: 1.5, ..Default::default() },
            TrainingConfig { random_mask_p: 0.0, ..Default::default() },
            TrainingConfig { random_mask_p: 1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn mode_flags() {
        for m in [Mode::IgRl, Mode::Unconstrained, Mode::RandomMask] {
            assert_eq!(Mode::from_flag(m.flag()).unwrap(), m);
        }
        assert!(Mode::from_flag("ppo").is_err());
    }
}
