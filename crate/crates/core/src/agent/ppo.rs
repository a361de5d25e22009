//! Clipped-surrogate PPO update over stored recurrent sequences, with a
//! first-order adaptive optimizer and NaN-abort protection.

use super::net::{
    backward_sequence, entropy_of, forward_step, log_softmax, Layout, StepCache,
};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// One stored sequence: contiguous steps of a single episode slice, with the
/// recurrent state captured at its first step.
#[derive(Debug, Clone, Default)]
pub struct Sequence {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub initial_recurrent_state: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Internal loss-term weights. Production always runs (1, vf_coef, ent_coef);
/// the gradient checks exercise each term in isolation.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossReport {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Loss over a minibatch of sequences and its gradient w.r.t. the flat
/// parameters: mean over timesteps of
/// `-min(ratio*A, clip(ratio, 1 +/- clip_range)*A) + vf*(V - R)^2 - ent*H`.
pub fn loss_and_gradient(
    params: &[f64],
    layout: &Layout,
    batch: &[&Sequence],
    clip_range: f64,
    terms: LossTerms,
    grads: &mut [f64],
) -> LossReport {
    let total_steps: usize = batch.iter().map(|s| s.len()).sum();
    debug_assert!(total_steps > 0);
    let scale = 1.0 / total_steps as f64;

    let mut report = LossReport::default();
    let mut clipped = 0usize;

    for seq in batch {
        let mut caches: Vec<StepCache> = Vec::with_capacity(seq.len());
        let mut h = seq.initial_recurrent_state.clone();
        for obs in &seq.observations {
            let cache = forward_step(params, layout, obs, &h);
            h = cache.h.clone();
            caches.push(cache);
        }

        let mut d_logits: Vec<Vec<f64>> = Vec::with_capacity(seq.len());
        let mut d_value: Vec<f64> = Vec::with_capacity(seq.len());
        for (t, cache) in caches.iter().enumerate() {
            let lp = log_softmax(&cache.logits);
            let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let a = seq.actions[t];
            let adv = seq.advantages[t];
            let ratio = (lp[a] - seq.old_log_probs[t]).exp();
            let surr1 = ratio * adv;
            let surr2 = ratio.clamp(1.0 - clip_range, 1.0 + clip_range) * adv;
            report.policy += -surr1.min(surr2) * scale;
            if surr1 > surr2 {
                clipped += 1;
            }

            // d(-min)/d(logp_a): flows through whichever branch is active;
            // the clipped branch is flat outside the clip window.
            let gradient_flows = surr1 <= surr2
                || ((1.0 - clip_range)..=(1.0 + clip_range)).contains(&ratio);
            let d_logp_a = if gradient_flows { -adv * ratio } else { 0.0 } * terms.policy;

            let entropy = entropy_of(&lp);
            report.entropy += entropy * scale;

            let mut dl = vec![0.0; probs.len()];
            for k in 0..probs.len() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                // policy gradient through log-softmax
                dl[k] += d_logp_a * (onehot - probs[k]);
                // entropy bonus: d(-ent*H)/dz_k = ent * p_k * (lp_k + H)
                dl[k] += terms.entropy * probs[k] * (lp[k] + entropy);
                dl[k] *= scale;
            }
            d_logits.push(dl);

            let v_err = cache.value - seq.returns[t];
            report.value += v_err * v_err * scale;
            d_value.push(terms.value * 2.0 * v_err * scale);
        }
        backward_sequence(params, layout, &caches, &d_logits, &d_value, grads);
    }

    report.clip_fraction = clipped as f64 / total_steps as f64;
    report.total = terms.policy * report.policy + terms.value * report.value
        - terms.entropy * report.entropy;
    report
}

/// First-order adaptive optimizer with default moment coefficients.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales gradients in place when their global L2 norm exceeds `max_norm`.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= k;
        }
    }
    norm
}

/// Normalizes advantages to zero mean / unit std within one minibatch.
pub fn normalize_advantages(batch: &mut [Sequence]) {
    let n: usize = batch.iter().map(|s| s.len()).sum();
    if n == 0 {
        return;
    }
    let mean: f64 = batch.iter().flat_map(|s| &s.advantages).sum::<f64>() / n as f64;
    let var: f64 = batch
        .iter()
        .flat_map(|s| &s.advantages)
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / n as f64;
    let std = (var + 1e-8).sqrt();
    for s in batch.iter_mut() {
        for a in &mut s.advantages {
            *a = (*a - mean) / std;
        }
    }
}
