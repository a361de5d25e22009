//! Step-reward shaping: the RScore delta, similarity-range scaling, and
//! exponential-moving-average normalization.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Rewards earned while suggestion similarity is at or above `threshold` are
/// multiplied by `multiplier`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRange {
    pub threshold: f64,
    pub multiplier: f64,
}

/// Trade-off weights and reward-shaping knobs. `lambda2` is always
/// `1 - lambda1`; scaling thresholds are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub scaling_ranges: Vec<ScalingRange>,
    /// None disables moving-average normalization.
    pub ema_decay: Option<f64>,
    /// Optional penalty added to no-op steps, pre-normalization. 0 = off.
    pub noop_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig::balanced(0.5)
    }
}

impl RewardConfig {
    /// Complementary weights: lambda2 = 1 - lambda1. The default setting is
    /// 0.5/0.5; 0.3/0.7 prioritizes suggestion quality over leakage.
    pub fn balanced(lambda1: f64) -> Self {
        RewardConfig {
            lambda1,
            lambda2: 1.0 - lambda1,
            scaling_ranges: vec![
                ScalingRange { threshold: 0.75, multiplier: 1.5 },
                ScalingRange { threshold: 0.9, multiplier: 2.0 },
            ],
            ema_decay: Some(0.99),
            noop_penalty: 0.0,
        }
    }

    /// Raw RScore deltas with no scaling and no normalization; used by the
    /// telescoping checks.
    pub fn plain(lambda1: f64) -> Self {
        RewardConfig {
            lambda1,
            lambda2: 1.0 - lambda1,
            scaling_ranges: Vec::new(),
            ema_decay: None,
            noop_penalty: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if !(0.0..=1.0).contains(&self.lambda1) {
            return Err(RewardConfigError::LambdaOutOfRange(self.lambda1));
        }
        if (self.lambda1 + self.lambda2 - 1.0).abs() > 1e-9 {
            return Err(RewardConfigError::LambdasNotComplementary {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            });
        }
        for w in self.scaling_ranges.windows(2) {
            if w[1].threshold <= w[0].threshold {
                return Err(RewardConfigError::ThresholdsNotIncreasing);
            }
        }
        Ok(())
    }

    /// Multiplier of the highest range whose threshold the similarity meets.
    pub fn multiplier_for(&self, suggestion_similarity: f64) -> f64 {
        self.scaling_ranges
            .iter()
            .rev()
            .find(|r| suggestion_similarity >= r.threshold)
            .map(|r| r.multiplier)
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardConfigError {
    #[error("lambda1 must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),
    #[error("lambda1 + lambda2 must equal 1 (got {lambda1} + {lambda2})")]
    LambdasNotComplementary { lambda1: f64, lambda2: f64 },
    #[error("scaling thresholds must be strictly increasing")]
    ThresholdsNotIncreasing,
}

/// Stateful reward pipeline: positive deltas are boosted by the similarity
/// range multiplier, then everything is divided by a running moving average
/// of reward magnitude. The average starts at 1 so early rewards pass
/// through unscaled.
#[derive(Debug, Clone)]
pub struct RewardNormalizer {
    config: RewardConfig,
    ema: f64,
}

impl RewardNormalizer {
    pub fn new(config: &RewardConfig) -> Self {
        RewardNormalizer { config: config.clone(), ema: 1.0 }
    }

    pub fn ema(&self) -> f64 {
        self.ema
    }

    /// raw RScore delta -> scaled -> normalized.
    pub fn normalize(&mut self, raw: f64, suggestion_similarity: f64) -> f64 {
        let scaled = if raw > 0.0 {
            raw * self.config.multiplier_for(suggestion_similarity)
        } else {
            raw
        };
        match self.config.ema_decay {
            None => scaled,
            Some(decay) => {
                let out = scaled / self.ema.max(1e-8);
                self.ema = decay * self.ema + (1.0 - decay) * scaled.abs();
                out
            }
        }
    }
}

/// One Eq.-4 step: the RScore difference between successive manipulations,
/// scaled and normalized through `normalizer`.
pub fn step_reward(
    prev_rscore: f64,
    cur_rscore: f64,
    suggestion_similarity: f64,
    normalizer: &mut RewardNormalizer,
) -> f64 {
    normalizer.normalize(cur_rscore - prev_rscore, suggestion_similarity)
}
