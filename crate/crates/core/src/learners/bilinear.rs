//! Bilinear embedding regressor for affinity prediction.
//!
//! The drug one-hot goes through three affine layers (rectifier between
//! them, hidden widths equal to the embedding dim); the protein one-hot
//! through a single affine layer. The predicted score is the dot product
//! of the two embeddings.

// indexed loops keep the matrix kernels aligned with the math
#![allow(clippy::needless_range_loop)]

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Gaussian;

/// All parameters of the bilinear model. Weight matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearParams {
    pub n_drugs: usize,
    pub n_proteins: usize,
    pub embed_dim: usize,
    /// Drug layer 1, `embed_dim x n_drugs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Drug layer 2, `embed_dim x embed_dim`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// Drug layer 3, `embed_dim x embed_dim`.
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
    /// Protein encoder, `embed_dim x n_proteins`.
    pub wp: Vec<f64>,
    pub bp: Vec<f64>,
}

/// Intermediate activations of one forward pass, kept for backprop.
pub(crate) struct BilinearTrace {
    pub a1: Vec<f64>,
    pub h1: Vec<f64>,
    pub a2: Vec<f64>,
    pub h2: Vec<f64>,
    pub drug_embed: Vec<f64>,
    pub protein_embed: Vec<f64>,
    pub prediction: f64,
}

impl BilinearParams {
    /// Random initialization: embedding tables N(0, 0.1), hidden layers
    /// scaled by 1/sqrt(embed_dim). Rectifier-layer biases start at a small
    /// positive offset plus noise so no preactivation sits exactly on the
    /// kink and fewer units begin dead.
    pub fn init(n_drugs: usize, n_proteins: usize, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut gauss = Gaussian::new();
        let e = embed_dim;
        let table_std = 0.1;
        let hidden_std = 1.0 / (e as f64).sqrt();
        let draw = |n: usize, std: f64, rng: &mut ChaCha8Rng, g: &mut Gaussian| -> Vec<f64> {
            (0..n).map(|_| std * g.sample(rng)).collect()
        };
        let bias = |n: usize, rng: &mut ChaCha8Rng, g: &mut Gaussian| -> Vec<f64> {
            (0..n).map(|_| 0.05 + 0.01 * g.sample(rng)).collect()
        };
        Self {
            n_drugs,
            n_proteins,
            embed_dim: e,
            w1: draw(e * n_drugs, table_std, rng, &mut gauss),
            b1: bias(e, rng, &mut gauss),
            w2: draw(e * e, hidden_std, rng, &mut gauss),
            b2: bias(e, rng, &mut gauss),
            w3: draw(e * e, hidden_std, rng, &mut gauss),
            b3: vec![0.0; e],
            wp: draw(e * n_proteins, table_std, rng, &mut gauss),
            bp: vec![0.0; e],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            n_drugs: self.n_drugs,
            n_proteins: self.n_proteins,
            embed_dim: self.embed_dim,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
            w3: vec![0.0; self.w3.len()],
            b3: vec![0.0; self.b3.len()],
            wp: vec![0.0; self.wp.len()],
            bp: vec![0.0; self.bp.len()],
        }
    }

    fn arrays(&self) -> [&Vec<f64>; 8] {
        [
            &self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3, &self.wp, &self.bp,
        ]
    }

    fn arrays_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
            &mut self.wp,
            &mut self.bp,
        ]
    }

    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn flat(&self, mut index: usize) -> f64 {
        for a in self.arrays() {
            if index < a.len() {
                return a[index];
            }
            index -= a.len();
        }
        panic!("flat index out of range");
    }

    pub fn flat_mut(&mut self, mut index: usize) -> &mut f64 {
        for a in self.arrays_mut() {
            if index < a.len() {
                return &mut a[index];
            }
            index -= a.len();
        }
        panic!("flat index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// `self -= lr * grad`, elementwise.
    pub fn step(&mut self, grad: &Self, lr: f64) {
        let gs = grad.arrays();
        for (p, g) in self.arrays_mut().into_iter().zip(gs) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
    }

    pub(crate) fn forward(&self, drug: usize, protein: usize) -> BilinearTrace {
        let e = self.embed_dim;
        // One-hot input: layer 1 reduces to a column of w1.
        let mut a1 = vec![0.0; e];
        for i in 0..e {
            a1[i] = self.w1[i * self.n_drugs + drug] + self.b1[i];
        }
        let h1: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();

        let mut a2 = vec![0.0; e];
        for i in 0..e {
            let mut s = self.b2[i];
            for j in 0..e {
                s += self.w2[i * e + j] * h1[j];
            }
            a2[i] = s;
        }
        let h2: Vec<f64> = a2.iter().map(|&v| v.max(0.0)).collect();

        let mut drug_embed = vec![0.0; e];
        for i in 0..e {
            let mut s = self.b3[i];
            for j in 0..e {
                s += self.w3[i * e + j] * h2[j];
            }
            drug_embed[i] = s;
        }

        let mut protein_embed = vec![0.0; e];
        for i in 0..e {
            protein_embed[i] = self.wp[i * self.n_proteins + protein] + self.bp[i];
        }

        let prediction = drug_embed
            .iter()
            .zip(&protein_embed)
            .map(|(a, b)| a * b)
            .sum();
        BilinearTrace {
            a1,
            h1,
            a2,
            h2,
            drug_embed,
            protein_embed,
            prediction,
        }
    }

    pub fn predict(&self, drug: usize, protein: usize) -> f64 {
        self.forward(drug, protein).prediction
    }

    /// Concatenated drug and protein embeddings, length `2 * embed_dim`.
    pub fn features(&self, drug: usize, protein: usize) -> Vec<f64> {
        let t = self.forward(drug, protein);
        let mut f = t.drug_embed;
        f.extend_from_slice(&t.protein_embed);
        f
    }

    /// Accumulate the gradient of `weight * (prediction - target)^2` into
    /// `grad`, given a stored forward trace.
    pub(crate) fn accumulate_grad(
        &self,
        drug: usize,
        protein: usize,
        target: f64,
        weight: f64,
        trace: &BilinearTrace,
        grad: &mut Self,
    ) {
        let e = self.embed_dim;
        let g_y = 2.0 * weight * (trace.prediction - target);

        // Split of the dot product.
        let g_ed: Vec<f64> = trace.protein_embed.iter().map(|&v| g_y * v).collect();
        let g_ep: Vec<f64> = trace.drug_embed.iter().map(|&v| g_y * v).collect();

        for i in 0..e {
            grad.bp[i] += g_ep[i];
            grad.wp[i * self.n_proteins + protein] += g_ep[i];
        }

        // Layer 3.
        let mut g_h2 = vec![0.0; e];
        for i in 0..e {
            grad.b3[i] += g_ed[i];
            for j in 0..e {
                grad.w3[i * e + j] += g_ed[i] * trace.h2[j];
                g_h2[j] += self.w3[i * e + j] * g_ed[i];
            }
        }
        // Layer 2 through the rectifier.
        let mut g_h1 = vec![0.0; e];
        for i in 0..e {
            let g_a2 = if trace.a2[i] > 0.0 { g_h2[i] } else { 0.0 };
            grad.b2[i] += g_a2;
            for j in 0..e {
                grad.w2[i * e + j] += g_a2 * trace.h1[j];
                g_h1[j] += self.w2[i * e + j] * g_a2;
            }
        }
        // Layer 1 (one-hot input touches a single column).
        for i in 0..e {
            let g_a1 = if trace.a1[i] > 0.0 { g_h1[i] } else { 0.0 };
            grad.b1[i] += g_a1;
            grad.w1[i * self.n_drugs + drug] += g_a1;
        }
    }
}
