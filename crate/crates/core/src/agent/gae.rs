//! Generalized advantage estimation over one environment's rollout stream.

use alloc::vec;
use alloc::vec::Vec;

/// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
/// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// returns_t = A_t + V(s_t)
///
/// `bootstrap_value` stands in for V(s_T) when the stream ends mid-episode.
pub fn compute_returns_and_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert_eq!(values.len(), n);
    debug_assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n {
            if dones[t] { 0.0 } else { values[t + 1] }
        } else {
            bootstrap_value
        };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_advantage = delta + gamma * gae_lambda * not_done * next_advantage;
        advantages[t] = next_advantage;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}
