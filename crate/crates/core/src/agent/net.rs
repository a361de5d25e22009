//! The policy/value network: a shared recurrent core feeding two dense
//! stacks. Forward caching plus backpropagation through time over stored
//! sequences, all over the flat parameter vector.

use super::math::{
    accumulate_bias, accumulate_outer, add_bias, matvec, matvec_add, matvec_transpose_add,
    tanh_backward, tanh_inplace, Bias, Mat,
};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Network shape. Defaults follow the training setup: a width-128 recurrent
/// core shared by both heads, then [256, 256, 256, 128] dense stacks for the
/// policy and the value function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub recurrent_dim: usize,
    pub pi_dims: Vec<usize>,
    pub vf_dims: Vec<usize>,
}

impl NetConfig {
    pub fn standard(obs_dim: usize, n_actions: usize) -> Self {
        NetConfig {
            obs_dim,
            n_actions,
            recurrent_dim: 128,
            pi_dims: vec![256, 256, 256, 128],
            vf_dims: vec![256, 256, 256, 128],
        }
    }
}

#[derive(Debug, Clone)]
struct StackLayout {
    layers: Vec<(Mat, Bias)>,
    head: (Mat, Bias),
}

/// Offsets of every weight block inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub core_wx: Mat,
    pub core_wh: Mat,
    pub core_b: Bias,
    pi: StackLayout,
    vf: StackLayout,
    pub total: usize,
}

fn stack_layout(mut off: usize, input: usize, dims: &[usize], out_dim: usize) -> (StackLayout, usize) {
    let mut layers = Vec::new();
    let mut prev = input;
    for &d in dims {
        let w = Mat { off, rows: d, cols: prev };
        off += w.len();
        let b = Bias { off, len: d };
        off += d;
        layers.push((w, b));
        prev = d;
    }
    let head_w = Mat { off, rows: out_dim, cols: prev };
    off += head_w.len();
    let head_b = Bias { off, len: out_dim };
    off += out_dim;
    (StackLayout { layers, head: (head_w, head_b) }, off)
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Layout {
        let r = cfg.recurrent_dim;
        let core_wx = Mat { off: 0, rows: r, cols: cfg.obs_dim };
        let mut off = core_wx.len();
        let core_wh = Mat { off, rows: r, cols: r };
        off += core_wh.len();
        let core_b = Bias { off, len: r };
        off += r;
        let (pi, off2) = stack_layout(off, r, &cfg.pi_dims, cfg.n_actions);
        let (vf, total) = stack_layout(off2, r, &cfg.vf_dims, 1);
        Layout { core_wx, core_wh, core_b, pi, vf, total }
    }
}

/// Scaled-uniform initialization, drawn in f32 precision so freshly
/// initialized parameters survive the 32-bit checkpoint format bit-exactly.
pub fn init_params(layout: &Layout, rng: &mut impl Rng) -> Vec<f64> {
    let mut params = vec![0.0f64; layout.total];
    let init_mat = |m: Mat, params: &mut Vec<f64>, rng: &mut dyn rand::RngCore| {
        let bound = (6.0 / (m.rows + m.cols) as f64).sqrt();
        for v in &mut params[m.off..m.off + m.len()] {
            let u: f32 = rng.gen::<f32>() * 2.0 - 1.0;
            *v = (u as f64 * bound) as f32 as f64;
        }
    };
    init_mat(layout.core_wx, &mut params, rng);
    init_mat(layout.core_wh, &mut params, rng);
    for (w, _) in layout.pi.layers.iter().chain(layout.vf.layers.iter()) {
        init_mat(*w, &mut params, rng);
    }
    init_mat(layout.pi.head.0, &mut params, rng);
    init_mat(layout.vf.head.0, &mut params, rng);
    params
}

/// Per-step activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub obs: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h: Vec<f64>,
    pi_acts: Vec<Vec<f64>>,
    vf_acts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

fn stack_forward(
    params: &[f64],
    stack: &StackLayout,
    input: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(stack.layers.len());
    let mut cur: &[f64] = input;
    for (w, b) in &stack.layers {
        let mut z = vec![0.0; w.rows];
        matvec(params, *w, cur, &mut z);
        add_bias(params, *b, &mut z);
        tanh_inplace(&mut z);
        acts.push(z);
        cur = acts.last().unwrap();
    }
    let (hw, hb) = &stack.head;
    let mut out = vec![0.0; hw.rows];
    matvec(params, *hw, cur, &mut out);
    add_bias(params, *hb, &mut out);
    (acts, out)
}

/// One recurrent step: h' = tanh(Wx obs + Wh h + b), then both heads.
/// Deterministic given parameters and state.
pub fn forward_step(
    params: &[f64],
    layout: &Layout,
    obs: &[f64],
    h_prev: &[f64],
) -> StepCache {
    let r = layout.core_b.len;
    let mut h = vec![0.0; r];
    matvec(params, layout.core_wx, obs, &mut h);
    matvec_add(params, layout.core_wh, h_prev, &mut h);
    add_bias(params, layout.core_b, &mut h);
    tanh_inplace(&mut h);

    let (pi_acts, logits) = stack_forward(params, &layout.pi, &h);
    let (vf_acts, value_out) = stack_forward(params, &layout.vf, &h);

    StepCache {
        obs: obs.to_vec(),
        h_prev: h_prev.to_vec(),
        h,
        pi_acts,
        vf_acts,
        logits,
        value: value_out[0],
    }
}

fn stack_backward(
    params: &[f64],
    grads: &mut [f64],
    stack: &StackLayout,
    cache_acts: &[Vec<f64>],
    input: &[f64],
    d_out: &[f64],
) -> Vec<f64> {
    let (hw, hb) = &stack.head;
    let last_act: &[f64] = cache_acts.last().map(|v| v.as_slice()).unwrap_or(input);
    accumulate_outer(grads, *hw, d_out, last_act);
    accumulate_bias(grads, *hb, d_out);
    let mut da = vec![0.0; hw.cols];
    matvec_transpose_add(params, *hw, d_out, &mut da);

    for (li, (w, b)) in stack.layers.iter().enumerate().rev() {
        let a = &cache_acts[li];
        let dz = tanh_backward(&da, a);
        let below: &[f64] = if li == 0 { input } else { &cache_acts[li - 1] };
        accumulate_outer(grads, *w, &dz, below);
        accumulate_bias(grads, *b, &dz);
        da = vec![0.0; w.cols];
        matvec_transpose_add(params, *w, &dz, &mut da);
    }
    da
}

/// BPTT over one stored sequence. `d_logits[t]` / `d_value[t]` are the loss
/// gradients at each step; the recurrent state is replayed from the caches.
pub fn backward_sequence(
    params: &[f64],
    layout: &Layout,
    caches: &[StepCache],
    d_logits: &[Vec<f64>],
    d_value: &[f64],
    grads: &mut [f64],
) {
    let r = layout.core_b.len;
    let mut dh_carry = vec![0.0; r];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let mut dh = dh_carry.clone();
        let dh_pi = stack_backward(params, grads, &layout.pi, &cache.pi_acts, &cache.h, &d_logits[t]);
        let dv = [d_value[t]];
        let dh_vf = stack_backward(params, grads, &layout.vf, &cache.vf_acts, &cache.h, &dv);
        for i in 0..r {
            dh[i] += dh_pi[i] + dh_vf[i];
        }
        let dpre = tanh_backward(&dh, &cache.h);
        accumulate_outer(grads, layout.core_wx, &dpre, &cache.obs);
        accumulate_outer(grads, layout.core_wh, &dpre, &cache.h_prev);
        accumulate_bias(grads, layout.core_b, &dpre);
        dh_carry = vec![0.0; r];
        matvec_transpose_add(params, layout.core_wh, &dpre, &mut dh_carry);
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - max - log_sum).collect()
}

pub fn entropy_of(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

/// Categorical sample consistent with the softmax of `logits`.
pub fn sample_action(logits: &[f64], rng: &mut impl Rng) -> (usize, f64) {
    let lp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, l) in lp.iter().enumerate() {
        cum += l.exp();
        if u < cum {
            return (i, lp[i]);
        }
    }
    let last = lp.len() - 1;
    (last, lp[last])
}

/// Deterministic argmax mode for inference; ties take the smallest index.
pub fn greedy_action(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> NetConfig {
        NetConfig {
            obs_dim: 3,
            n_actions: 4,
            recurrent_dim: 4,
            pi_dims: vec![5],
            vf_dims: vec![5],
        }
    }

    #[test]
    fn zero_weights_give_uniform_logits_and_zero_value() {
        let cfg = tiny_cfg();
        let layout = Layout::new(&cfg);
        let params = vec![0.0; layout.total];
        let cache = forward_step(&params, &layout, &[1.0, -2.0, 3.0], &vec![0.0; 4]);
        assert!(cache.logits.iter().all(|l| *l == 0.0));
        assert_eq!(cache.value, 0.0);
        let lp = log_softmax(&cache.logits);
        for l in &lp {
            assert!((*l - (1.0f64 / 4.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrence_is_live() {
        let cfg = tiny_cfg();
        let layout = Layout::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = init_params(&layout, &mut rng);
        let obs = [0.5, -0.5, 0.25];
        let h_zero = vec![0.0; 4];
        let mut h_one = vec![0.0; 4];
        h_one[0] = 0.9;
        let a = forward_step(&params, &layout, &obs, &h_zero);
        let b = forward_step(&params, &layout, &obs, &h_one);
        assert_ne!(a.logits, b.logits, "different recurrent states must change logits");
    }

    #[test]
    fn uniform_entropy_is_ln_n_and_maximal() {
        let lp = log_softmax(&[0.0; 12]);
        let h = entropy_of(&lp);
        assert!((h - (12.0f64).ln()).abs() < 1e-12);
        for skew in [0.5, 1.0, 3.0] {
            let mut logits = [0.0; 12];
            logits[3] = skew;
            let h2 = entropy_of(&log_softmax(&logits));
            assert!(h2 < h);
        }
    }

    #[test]
    fn extreme_logit_dominates_sampling() {
        let mut logits = vec![0.0; 4];
        logits[2] = 1e6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (a, lp) = sample_action(&logits, &mut rng);
            assert_eq!(a, 2);
            assert!(lp.abs() < 1e-9, "log-prob of the certain action is ~0");
        }
        assert_eq!(greedy_action(&logits), 2);
    }

    #[test]
    fn uniform_sampling_frequencies_pass_chi_squared() {
        // 12 actions, 100k draws; df=11, crit(0.999) ~ 31.3
        let logits = vec![0.0; 12];
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0u64; 12];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_action(&logits, &mut rng).0] += 1;
        }
        let expected = n as f64 / 12.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 31.3, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn sampled_log_prob_matches_softmax() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        let lp = log_softmax(&logits);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, got) = sample_action(&logits, &mut rng);
        assert!((got - lp[a]).abs() < 1e-15);
    }
}
