//! Multinomial logistic classifier with an identity feature backbone.

#![allow(clippy::needless_range_loop)]

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Gaussian;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub dim: usize,
    pub n_classes: usize,
    /// Row-major `n_classes x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LogisticParams {
    /// Small random weights keep committee members distinct; zero biases.
    pub fn init(dim: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut gauss = Gaussian::new();
        Self {
            dim,
            n_classes,
            weights: (0..n_classes * dim).map(|_| 0.1 * gauss.sample(rng)).collect(),
            bias: vec![0.0; n_classes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            n_classes: self.n_classes,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn flat_len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn flat(&self, index: usize) -> f64 {
        if index < self.weights.len() {
            self.weights[index]
        } else {
            self.bias[index - self.weights.len()]
        }
    }

    pub fn flat_mut(&mut self, index: usize) -> &mut f64 {
        if index < self.weights.len() {
            &mut self.weights[index]
        } else {
            let i = index - self.weights.len();
            &mut self.bias[i]
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn step(&mut self, grad: &Self, lr: f64) {
        for (p, g) in self.weights.iter_mut().zip(&grad.weights) {
            *p -= lr * g;
        }
        for (p, g) in self.bias.iter_mut().zip(&grad.bias) {
            *p -= lr * g;
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|k| {
                let mut s = self.bias[k];
                for (j, &v) in x.iter().enumerate() {
                    s += self.weights[k * self.dim + j] * v;
                }
                s
            })
            .collect()
    }

    /// Softmax of the logits; entries positive and summing to one.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Argmax class, smaller index on ties.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Accumulate the gradient of `weight * cross_entropy(x, label)`.
    pub fn accumulate_grad(&self, x: &[f64], label: usize, weight: f64, grad: &mut Self) {
        let p = self.predict_proba(x);
        for k in 0..self.n_classes {
            let g = weight * (p[k] - if k == label { 1.0 } else { 0.0 });
            grad.bias[k] += g;
            for (j, &v) in x.iter().enumerate() {
                grad.weights[k * self.dim + j] += g * v;
            }
        }
    }

    /// Cross-entropy of one example (natural log).
    pub fn cross_entropy(&self, x: &[f64], label: usize) -> f64 {
        let logits = self.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        log_z - logits[label]
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&v| v / z).collect()
}
