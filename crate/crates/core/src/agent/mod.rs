//! Recurrent PPO: the policy/value network, generalized advantage
//! estimation, clipped-surrogate updates, the training loop and the
//! checkpoint format.

mod checkpoint;
mod gae;
mod math;
mod net;
mod ppo;
mod train;

pub use checkpoint::{expect_shape, load_policy, save_policy, CheckpointError};
pub use gae::compute_returns_and_gae;
pub use net::{
    forward_step, greedy_action, init_params, log_softmax, sample_action, Layout, NetConfig,
    StepCache,
};
pub use ppo::{loss_and_gradient, Adam, LossReport, LossTerms, Sequence};
pub use train::{train, train_with, IterationMetrics, TrainConfig, TrainOutput};

use crate::env::RunningStats;
use alloc::vec::Vec;

/// A trained (or initializing) policy: network shape, flat parameters and
/// the frozen observation-normalization statistics.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    config: NetConfig,
    layout: Layout,
    params: Vec<f64>,
    stats: RunningStats,
}

impl PolicyParams {
    pub fn new(config: NetConfig, params: Vec<f64>, stats: RunningStats) -> Self {
        let layout = Layout::new(&config);
        debug_assert_eq!(layout.total, params.len());
        PolicyParams { config, layout, params, stats }
    }

    /// Freshly initialized parameters (f32-representable values).
    pub fn init(config: NetConfig, seed: u64) -> Self {
        use rand::SeedableRng;
        let layout = Layout::new(&config);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let params = net::init_params(&layout, &mut rng);
        let stats = RunningStats::new(config.obs_dim);
        PolicyParams { config, layout, params, stats }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn raw(&self) -> &[f64] {
        &self.params
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: RunningStats) {
        self.stats = stats;
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Zero state for the recurrent core; reset at every episode start.
    pub fn initial_recurrent_state(&self) -> Vec<f64> {
        alloc::vec![0.0; self.config.recurrent_dim]
    }

    /// Normalizes a raw observation with the frozen statistics.
    pub fn normalize_obs(&self, raw: &[f64]) -> Vec<f64> {
        self.stats.normalize(raw)
    }

    /// (action logits, value, next recurrent state).
    pub fn forward(&self, obs: &[f64], recurrent_state: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
        let cache = forward_step(&self.params, &self.layout, obs, recurrent_state);
        (cache.logits, cache.value, cache.h)
    }

    /// Rounds every parameter to f32 precision so that saved checkpoints
    /// reproduce forward passes bit-exactly after loading.
    pub fn quantize_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }
}
