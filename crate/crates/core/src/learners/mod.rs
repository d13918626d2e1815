//! Learner contract and training.
//!
//! Two model families share one interface: a bilinear embedding regressor
//! for affinity tables and a multinomial logistic classifier for feature
//! vectors. Training is plain mini-batch SGD with early stopping on a
//! held-out validation split, bit-reproducible per seed.

mod bilinear;
mod logistic;

pub use bilinear::BilinearParams;
pub use logistic::{softmax, LogisticParams};

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::pool::SampleId;
use crate::seed::{mix_seed, rng_for};

// Sub-streams used inside fit(); seeds passed to fit are re-mixed so the
// caller's other streams stay untouched.
const SUB_INIT: u64 = 101;
const SUB_SPLIT: u64 = 102;
const SUB_EPOCH: u64 = 103;

/// Model family plus its shape hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerFamily {
    Bilinear {
        n_drugs: usize,
        n_proteins: usize,
        embed_dim: usize,
    },
    Logistic {
        dim: usize,
        n_classes: usize,
    },
}

impl LearnerFamily {
    /// Family matching a dataset's task.
    pub fn for_dataset(dataset: &Dataset, embed_dim: usize) -> LearnerFamily {
        match dataset {
            Dataset::Affinity(d) => LearnerFamily::Bilinear {
                n_drugs: d.n_drugs(),
                n_proteins: d.n_proteins(),
                embed_dim,
            },
            Dataset::Classification(d) => LearnerFamily::Logistic {
                dim: d.dim(),
                n_classes: d.n_classes(),
            },
        }
    }
}

/// One training example in either family's shape.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainExample {
    Pair {
        drug: usize,
        protein: usize,
        target: f64,
    },
    Vector {
        features: Vec<f64>,
        label: usize,
    },
}

/// Borrowed view of one sample for inference.
#[derive(Debug, Clone, Copy)]
pub enum SampleRef<'a> {
    Pair { drug: usize, protein: usize },
    Vector(&'a [f64]),
}

/// Build a [`SampleRef`] for a dataset sample.
pub fn sample_ref(dataset: &Dataset, id: SampleId) -> Result<SampleRef<'_>> {
    match dataset {
        Dataset::Affinity(d) => {
            let (drug, protein) = d.pair(id.0)?;
            Ok(SampleRef::Pair { drug, protein })
        }
        Dataset::Classification(d) => Ok(SampleRef::Vector(d.features(id.0)?)),
    }
}

/// Labeled training examples for a set of sample ids.
pub fn training_examples(dataset: &Dataset, ids: &[SampleId]) -> Result<Vec<TrainExample>> {
    ids.iter()
        .map(|&id| match dataset {
            Dataset::Affinity(d) => {
                let (drug, protein) = d.pair(id.0)?;
                Ok(TrainExample::Pair {
                    drug,
                    protein,
                    target: d.score(id.0)?,
                })
            }
            Dataset::Classification(d) => Ok(TrainExample::Vector {
                features: d.features(id.0)?.to_vec(),
                label: d.label(id.0)?,
            }),
        })
        .collect()
}

/// Whether retraining starts fresh or from the previous round's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    FromScratch,
    WarmStart,
}

/// SGD and early-stopping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub retrain: RetrainMode,
    /// Fraction of the labeled pool held out for validation, in (0, 1).
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 50,
            patience: 3,
            retrain: RetrainMode::FromScratch,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidConfig(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "validation_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Trained parameters of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerParams {
    Bilinear(BilinearParams),
    Logistic(LogisticParams),
}

impl LearnerParams {
    pub fn family(&self) -> LearnerFamily {
        match self {
            LearnerParams::Bilinear(p) => LearnerFamily::Bilinear {
                n_drugs: p.n_drugs,
                n_proteins: p.n_proteins,
                embed_dim: p.embed_dim,
            },
            LearnerParams::Logistic(p) => LearnerFamily::Logistic {
                dim: p.dim,
                n_classes: p.n_classes,
            },
        }
    }

    /// Regression prediction; unsupported for classifiers.
    pub fn predict(&self, sample: SampleRef<'_>) -> Result<f64> {
        match (self, sample) {
            (LearnerParams::Bilinear(p), SampleRef::Pair { drug, protein }) => {
                if drug >= p.n_drugs || protein >= p.n_proteins {
                    return Err(Error::InvalidInput(format!(
                        "pair ({drug}, {protein}) out of range"
                    )));
                }
                Ok(p.predict(drug, protein))
            }
            (LearnerParams::Logistic(_), _) => Err(Error::Unsupported(
                "predict is a regression operation; classifiers expose predict_proba".into(),
            )),
            _ => Err(Error::InvalidInput("sample shape does not match family".into())),
        }
    }

    /// Class-probability vector; unsupported for regressors.
    pub fn predict_proba(&self, sample: SampleRef<'_>) -> Result<Vec<f64>> {
        match (self, sample) {
            (LearnerParams::Logistic(p), SampleRef::Vector(x)) => {
                if x.len() != p.dim {
                    return Err(Error::LengthMismatch {
                        left: x.len(),
                        right: p.dim,
                    });
                }
                Ok(p.predict_proba(x))
            }
            (LearnerParams::Bilinear(_), _) => Err(Error::Unsupported(
                "predict_proba is undefined for the regression family".into(),
            )),
            _ => Err(Error::InvalidInput("sample shape does not match family".into())),
        }
    }

    /// Penultimate representation: concatenated embeddings for the bilinear
    /// model, the raw input for the classifier (identity backbone).
    pub fn features(&self, sample: SampleRef<'_>) -> Result<Vec<f64>> {
        match (self, sample) {
            (LearnerParams::Bilinear(p), SampleRef::Pair { drug, protein }) => {
                if drug >= p.n_drugs || protein >= p.n_proteins {
                    return Err(Error::InvalidInput(format!(
                        "pair ({drug}, {protein}) out of range"
                    )));
                }
                Ok(p.features(drug, protein))
            }
            (LearnerParams::Logistic(_), SampleRef::Vector(x)) => Ok(x.to_vec()),
            _ => Err(Error::InvalidInput("sample shape does not match family".into())),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            LearnerParams::Bilinear(p) => p.all_finite(),
            LearnerParams::Logistic(p) => p.all_finite(),
        }
    }

    pub fn flat_len(&self) -> usize {
        match self {
            LearnerParams::Bilinear(p) => p.flat_len(),
            LearnerParams::Logistic(p) => p.flat_len(),
        }
    }

    pub fn flat(&self, index: usize) -> f64 {
        match self {
            LearnerParams::Bilinear(p) => p.flat(index),
            LearnerParams::Logistic(p) => p.flat(index),
        }
    }

    pub fn flat_mut(&mut self, index: usize) -> &mut f64 {
        match self {
            LearnerParams::Bilinear(p) => p.flat_mut(index),
            LearnerParams::Logistic(p) => p.flat_mut(index),
        }
    }

    /// Exact-round-trip JSON encoding of the parameter arrays.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn random_init(family: &LearnerFamily, seed: u64) -> LearnerParams {
        let mut rng = rng_for(seed, SUB_INIT, 0);
        match *family {
            LearnerFamily::Bilinear {
                n_drugs,
                n_proteins,
                embed_dim,
            } => LearnerParams::Bilinear(BilinearParams::init(n_drugs, n_proteins, embed_dim, &mut rng)),
            LearnerFamily::Logistic { dim, n_classes } => {
                LearnerParams::Logistic(LogisticParams::init(dim, n_classes, &mut rng))
            }
        }
    }

    fn zeros_like(&self) -> LearnerParams {
        match self {
            LearnerParams::Bilinear(p) => LearnerParams::Bilinear(p.zeros_like()),
            LearnerParams::Logistic(p) => LearnerParams::Logistic(p.zeros_like()),
        }
    }

    fn step(&mut self, grad: &LearnerParams, lr: f64) {
        match (self, grad) {
            (LearnerParams::Bilinear(p), LearnerParams::Bilinear(g)) => p.step(g, lr),
            (LearnerParams::Logistic(p), LearnerParams::Logistic(g)) => p.step(g, lr),
            _ => unreachable!("gradient family matches parameter family"),
        }
    }
}

/// Mean loss over a batch: squared error for the regressor, cross-entropy
/// for the classifier.
pub fn batch_loss(params: &LearnerParams, examples: &[TrainExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InsufficientData("empty loss batch".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        match (params, ex) {
            (LearnerParams::Bilinear(p), TrainExample::Pair { drug, protein, target }) => {
                let r = p.predict(*drug, *protein) - target;
                total += r * r;
            }
            (LearnerParams::Logistic(p), TrainExample::Vector { features, label }) => {
                total += p.cross_entropy(features, *label);
            }
            _ => return Err(Error::InvalidInput("example shape does not match family".into())),
        }
    }
    Ok(total / examples.len() as f64)
}

/// Mean loss and its gradient with respect to every parameter.
pub fn batch_loss_and_grad(
    params: &LearnerParams,
    examples: &[TrainExample],
) -> Result<(f64, LearnerParams)> {
    if examples.is_empty() {
        return Err(Error::InsufficientData("empty gradient batch".into()));
    }
    let weight = 1.0 / examples.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for ex in examples {
        match (params, ex, &mut grad) {
            (
                LearnerParams::Bilinear(p),
                TrainExample::Pair { drug, protein, target },
                LearnerParams::Bilinear(g),
            ) => {
                let trace = p.forward(*drug, *protein);
                let r = trace.prediction - target;
                total += r * r;
                p.accumulate_grad(*drug, *protein, *target, weight, &trace, g);
            }
            (
                LearnerParams::Logistic(p),
                TrainExample::Vector { features, label },
                LearnerParams::Logistic(g),
            ) => {
                total += p.cross_entropy(features, *label);
                p.accumulate_grad(features, *label, weight, g);
            }
            _ => return Err(Error::InvalidInput("example shape does not match family".into())),
        }
    }
    Ok((total * weight, grad))
}

/// Diagnostics from one training run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: LearnerParams,
    /// Loss on the train split at the end of training.
    pub train_loss: f64,
    /// Best validation loss observed.
    pub best_val_loss: f64,
    pub epochs_run: usize,
}

/// Mini-batch SGD with early stopping on a held-out validation split.
///
/// Training stops once the validation loss has not improved for `patience`
/// consecutive epochs (or at `max_epochs`), and the parameters at that
/// point are returned; `max_epochs = 0` returns the initialization
/// unchanged. Deterministic per seed.
pub fn fit(
    family: &LearnerFamily,
    examples: &[TrainExample],
    config: &TrainConfig,
    init: Option<&LearnerParams>,
    rng_seed: u64,
) -> Result<LearnerParams> {
    fit_detailed(family, examples, config, init, rng_seed).map(|o| o.params)
}

/// [`fit`] plus loss diagnostics.
pub fn fit_detailed(
    family: &LearnerFamily,
    examples: &[TrainExample],
    config: &TrainConfig,
    init: Option<&LearnerParams>,
    rng_seed: u64,
) -> Result<FitOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::InsufficientData("no labeled samples to fit".into()));
    }
    if config.retrain == RetrainMode::WarmStart && init.is_none() {
        return Err(Error::Precondition(
            "warm_start requires initial parameters".into(),
        ));
    }

    // Validation split, reshuffled per call from the provided seed.
    let n = examples.len();
    let n_val = ((config.validation_fraction * n as f64).round() as usize).max(1);
    if n.saturating_sub(n_val) < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples leave fewer than 2 for training after a validation split of {n_val}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut rng_for(rng_seed, SUB_SPLIT, 0));
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<TrainExample> = val_idx.iter().map(|&i| examples[i].clone()).collect();
    let train: Vec<TrainExample> = train_idx.iter().map(|&i| examples[i].clone()).collect();

    let mut params = match (config.retrain, init) {
        (RetrainMode::WarmStart, Some(p)) => p.clone(),
        _ => LearnerParams::random_init(family, rng_seed),
    };

    let mut best_val = batch_loss(&params, &val)?;
    let mut stale_epochs = 0usize;
    let mut epochs_run = 0usize;

    let mut batch_order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.max_epochs {
        shuffle(&mut batch_order, &mut rng_for(rng_seed, SUB_EPOCH, epoch as u64));
        for chunk in batch_order.chunks(config.batch_size) {
            let batch: Vec<TrainExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, grad) = batch_loss_and_grad(&params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            params.step(&grad, config.learning_rate);
        }
        epochs_run = epoch + 1;
        if !params.all_finite() {
            return Err(Error::TrainingDiverged(format!(
                "non-finite parameter after epoch {epoch}"
            )));
        }
        let val_loss = batch_loss(&params, &val)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        if val_loss < best_val {
            best_val = val_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }
    let train_loss = batch_loss(&params, &train)?;
    Ok(FitOutcome {
        params,
        train_loss,
        best_val_loss: best_val,
        epochs_run,
    })
}

fn shuffle(items: &mut [usize], rng: &mut rand_chacha::ChaCha8Rng) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}

/// C independently trained parameter sets of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    pub members: Vec<LearnerParams>,
}

impl Committee {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Committee-mean regression prediction.
    pub fn mean_prediction(&self, sample: SampleRef<'_>) -> Result<f64> {
        let mut total = 0.0;
        for m in &self.members {
            total += m.predict(sample)?;
        }
        Ok(total / self.members.len() as f64)
    }

    /// Per-member regression predictions.
    pub fn predictions(&self, sample: SampleRef<'_>) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.predict(sample)).collect()
    }

    /// Per-member class distributions.
    pub fn probabilities(&self, sample: SampleRef<'_>) -> Result<Vec<Vec<f64>>> {
        self.members.iter().map(|m| m.predict_proba(sample)).collect()
    }

    /// Average class distribution across members.
    pub fn mean_probability(&self, sample: SampleRef<'_>) -> Result<Vec<f64>> {
        let all = self.probabilities(sample)?;
        let k = all[0].len();
        let mut mean = vec![0.0; k];
        for p in &all {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= all.len() as f64;
        }
        Ok(mean)
    }
}

/// Train `c` members with seeds `base_seed .. base_seed + c - 1`. With
/// warm start each member resumes from its own previous parameters.
/// `threads > 1` fans members out over that many OS threads; per-member
/// seeding makes the result identical to the serial run.
pub fn train_committee(
    family: &LearnerFamily,
    examples: &[TrainExample],
    config: &TrainConfig,
    c: usize,
    base_seed: u64,
    init: Option<&Committee>,
    threads: usize,
) -> Result<Committee> {
    if c < 2 {
        return Err(Error::InvalidConfig(format!(
            "committee size must be >= 2, got {c}"
        )));
    }
    if let Some(prev) = init {
        if prev.size() != c {
            return Err(Error::InvalidConfig(format!(
                "warm-start committee has {} members, expected {c}",
                prev.size()
            )));
        }
    }
    let member_init = |i: usize| init.map(|prev| &prev.members[i]);
    let member_seed = |i: usize| mix_seed(base_seed, 0, i as u64);

    let members: Vec<Result<LearnerParams>> = if threads <= 1 || c == 1 {
        (0..c)
            .map(|i| fit(family, examples, config, member_init(i), member_seed(i)))
            .collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..c)
                .map(|i| {
                    let init_i = member_init(i);
                    let seed_i = member_seed(i);
                    scope.spawn(move || fit(family, examples, config, init_i, seed_i))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fit panicked")).collect()
        })
    };

    let mut out = Vec::with_capacity(c);
    for (i, r) in members.into_iter().enumerate() {
        match r {
            Ok(p) => out.push(p),
            Err(e) => {
                return Err(Error::CommitteeMember {
                    member: i,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(Committee { members: out })
}
