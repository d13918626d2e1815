//! Evaluation metrics: top-k coverage, accuracy, RMSE, and label-histogram
//! KL divergence between checkpoints.

use crate::datasets::{AffinityDataset, ClassificationDataset};
use crate::error::{Error, Result};

/// Additive smoothing applied to histogram counts before normalization;
/// keeps the KL finite when a small pool misses a class entirely.
pub const KL_SMOOTHING: f64 = 1e-6;

/// Top-k size for the coverage metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CoverageSpec {
    pub k: usize,
}

impl CoverageSpec {
    pub fn validate(&self, sample_count: usize) -> Result<()> {
        if self.k == 0 || self.k > sample_count {
            return Err(Error::InvalidConfig(format!(
                "coverage k = {} must lie in 1..={sample_count}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Indices of the k largest values, ties broken by smaller index.
fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of the true top-k that also appears in the predicted top-k.
/// Depends only on the rank order of `predictions`.
pub fn coverage_score(predictions: &[f64], ground_truth: &[f64], k: usize) -> Result<f64> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: ground_truth.len(),
        });
    }
    if k == 0 || k > predictions.len() {
        return Err(Error::InvalidConfig(format!(
            "coverage k = {k} must lie in 1..={}",
            predictions.len()
        )));
    }
    if let Some(bad) = predictions.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite prediction {bad}")));
    }
    let top_pred: std::collections::HashSet<usize> =
        top_k_indices(predictions, k).into_iter().collect();
    let hits = top_k_indices(ground_truth, k)
        .into_iter()
        .filter(|i| top_pred.contains(i))
        .count();
    Ok(hits as f64 / k as f64)
}

/// KL(P || Q) between two count histograms after additive smoothing and
/// normalization (natural log).
pub fn checkpoint_kl(hist_p: &[u64], hist_q: &[u64]) -> Result<f64> {
    if hist_p.len() != hist_q.len() {
        return Err(Error::LengthMismatch {
            left: hist_p.len(),
            right: hist_q.len(),
        });
    }
    if hist_p.is_empty() {
        return Err(Error::InvalidInput("empty histograms".into()));
    }
    let (np, nq): (u64, u64) = (hist_p.iter().sum(), hist_q.iter().sum());
    if np == 0 || nq == 0 {
        return Err(Error::InvalidInput(
            "checkpoint histograms must come from nonempty pools".into(),
        ));
    }
    let k = hist_p.len() as f64;
    let zp = np as f64 + k * KL_SMOOTHING;
    let zq = nq as f64 + k * KL_SMOOTHING;
    let mut kl = 0.0;
    for (&cp, &cq) in hist_p.iter().zip(hist_q) {
        let p = (cp as f64 + KL_SMOOTHING) / zp;
        let q = (cq as f64 + KL_SMOOTHING) / zq;
        kl += p * (p / q).ln();
    }
    Ok(kl)
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("accuracy of empty input".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("rmse of empty input".into()));
    }
    let mse: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / predicted.len() as f64;
    Ok(mse.sqrt())
}

/// Builds per-iteration label histograms of the labeled pool.
///
/// Classification pools bucket by class. Affinity pools bucket the labeled
/// scores into equal-frequency bins whose edges are fixed once from the
/// full ground-truth distribution, so histograms stay comparable across
/// iterations.
#[derive(Debug, Clone)]
pub enum LabelHistogrammer {
    Classes {
        n_classes: usize,
    },
    Quantiles {
        /// Interior bucket edges, ascending (`buckets - 1` of them).
        edges: Vec<f64>,
    },
}

/// Default bucket count for affinity histograms.
pub const AFFINITY_HISTOGRAM_BUCKETS: usize = 10;

impl LabelHistogrammer {
    pub fn for_classification(dataset: &ClassificationDataset) -> Self {
        LabelHistogrammer::Classes {
            n_classes: dataset.n_classes(),
        }
    }

    pub fn for_affinity(dataset: &AffinityDataset, buckets: usize) -> Self {
        let mut sorted: Vec<f64> = dataset.scores().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let edges = (1..buckets)
            .map(|b| sorted[(b * n / buckets).min(n - 1)])
            .collect();
        LabelHistogrammer::Quantiles { edges }
    }

    pub fn buckets(&self) -> usize {
        match self {
            LabelHistogrammer::Classes { n_classes } => *n_classes,
            LabelHistogrammer::Quantiles { edges } => edges.len() + 1,
        }
    }

    /// Histogram of the given labels/values.
    pub fn histogram<I>(&self, values: I) -> Vec<u64>
    where
        I: IntoIterator<Item = crate::datasets::LabelValue>,
    {
        let mut hist = vec![0u64; self.buckets()];
        for v in values {
            let bucket = match (self, v) {
                (LabelHistogrammer::Classes { .. }, crate::datasets::LabelValue::Class(c)) => c,
                (LabelHistogrammer::Quantiles { edges }, crate::datasets::LabelValue::Real(x)) => {
                    edges.partition_point(|&e| e < x)
                }
                _ => continue,
            };
            if bucket < hist.len() {
                hist[bucket] += 1;
            }
        }
        hist
    }
}
