//! Welford-style running mean/variance over observation dimensions.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        RunningStats { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    /// Rebuilds an accumulator from stored moments (checkpoint loading).
    pub fn from_moments(count: u64, mean: Vec<f64>, variance: Vec<f64>) -> Self {
        let m2 = variance.iter().map(|v| v * count as f64).collect();
        RunningStats { count, mean, m2 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per dimension.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|m| m / self.count as f64).collect()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in x.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (v - self.mean[i]);
        }
    }

    /// (x - mean) / sqrt(variance + 1e-8). With no recorded observations the
    /// input passes through unchanged.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return x.to_vec();
        }
        let n = self.count as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.mean[i]) / (self.m2[i] / n + VARIANCE_FLOOR).sqrt())
            .collect()
    }

    /// Exact merge of two accumulators (parallel Welford combination).
    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }
}
