//! Run configuration: a sectioned key = value file, named presets, and
//! command-line overrides, merged in that order on top of desk-scale
//! defaults. The resolved configuration serializes back to the same format
//! byte-stably, which is what the manifest hashes and reruns consume.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aal_core::datasets::{self, Dataset};
use aal_core::engine::ExperimentConfig;
use aal_core::learners::{RetrainMode, TrainConfig};
use aal_core::policies::PolicySpec;
use aal_core::{Error, Result};

/// How to obtain the ground-truth dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Bilinear {
        n_drugs: usize,
        n_proteins: usize,
        latent_rank: usize,
        noise_std: f64,
        seed: u64,
    },
    Blobs {
        classes: usize,
        per_class: usize,
        dim: usize,
        center_spread: f64,
        cluster_std: f64,
        seed: u64,
    },
    Table {
        path: PathBuf,
    },
}

impl DatasetSpec {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Bilinear {
                n_drugs,
                n_proteins,
                latent_rank,
                noise_std,
                seed,
            } => Ok(Dataset::Affinity(datasets::generate_bilinear_affinity(
                *n_drugs,
                *n_proteins,
                *latent_rank,
                *noise_std,
                *seed,
            )?)),
            DatasetSpec::Blobs {
                classes,
                per_class,
                dim,
                center_spread,
                cluster_std,
                seed,
            } => Ok(Dataset::Classification(datasets::generate_blobs(
                *classes,
                *per_class,
                *dim,
                *center_spread,
                *cluster_std,
                *seed,
            )?)),
            DatasetSpec::Table { path } => {
                Ok(Dataset::Affinity(datasets::load_affinity_table(path)?))
            }
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub dataset: DatasetSpec,
    pub m0: usize,
    pub n_add: usize,
    pub n_delete: usize,
    pub max_iterations: u32,
    pub coverage_target: Option<f64>,
    pub label_budget: Option<usize>,
    pub warmup: u32,
    pub metric_every: u32,
    pub allow_shrinking: bool,
    pub coverage_k: usize,
    pub addition_policy: PolicySpec,
    pub deletion_policy: PolicySpec,
    pub train: TrainConfig,
    pub embed_dim: usize,
    pub committee_size: usize,
    pub seed: u64,
    pub replications: usize,
}

impl ResolvedConfig {
    /// Desk-scale defaults: the 50x30 rank-4 surrogate with the half-split
    /// hybrid strategy.
    pub fn desk_default() -> Self {
        Self {
            dataset: DatasetSpec::Bilinear {
                n_drugs: 50,
                n_proteins: 30,
                latent_rank: 4,
                noise_std: 0.1,
                seed: 7,
            },
            m0: 16,
            n_add: 16,
            n_delete: 2,
            max_iterations: 120,
            coverage_target: Some(0.3),
            label_budget: None,
            warmup: 0,
            metric_every: 1,
            allow_shrinking: false,
            coverage_k: 50,
            addition_policy: PolicySpec::parse("hybrid(greedy:8,variance:8)").unwrap(),
            deletion_policy: PolicySpec::parse("hybrid(greedy:8,variance:8)").unwrap(),
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 64,
                max_epochs: 60,
                patience: 3,
                retrain: RetrainMode::FromScratch,
                validation_fraction: 0.2,
            },
            embed_dim: 16,
            committee_size: 3,
            seed: 1,
            replications: 1,
        }
    }

    /// The full-scale affinity protocol: 64 added / 8 deleted per
    /// iteration, committee of five, half-split hybrid, stop at coverage
    /// 0.3 or 300 iterations. Expects a KIBA-format table (set
    /// `dataset.path`).
    pub fn preset_kiba_paper() -> Self {
        Self {
            dataset: DatasetSpec::Table {
                path: PathBuf::from("kiba.tsv"),
            },
            m0: 64,
            n_add: 64,
            n_delete: 8,
            max_iterations: 300,
            coverage_target: Some(0.3),
            label_budget: None,
            warmup: 0,
            metric_every: 1,
            allow_shrinking: false,
            coverage_k: 1000,
            addition_policy: PolicySpec::parse("hybrid(greedy:32,variance:32)").unwrap(),
            deletion_policy: PolicySpec::parse("hybrid(greedy:32,variance:32)").unwrap(),
            train: TrainConfig {
                learning_rate: 0.001,
                batch_size: 64,
                max_epochs: 100,
                patience: 3,
                retrain: RetrainMode::FromScratch,
                validation_fraction: 0.2,
            },
            embed_dim: 128,
            committee_size: 5,
            seed: 1,
            replications: 1,
        }
    }

    /// The image-classification protocol at desk scale: 10 overlapping 2-D
    /// Gaussian blobs stand in for the 10 classes, 32 added / 4 deleted
    /// from a 128-sample warm-started pool, entropy addition and a 1:1
    /// entropy+distance rank ensemble for deletion, top-2n randomized
    /// selection.
    pub fn preset_cifar_paper_surrogate() -> Self {
        Self {
            dataset: DatasetSpec::Blobs {
                classes: 10,
                per_class: 200,
                dim: 2,
                center_spread: 2.2,
                cluster_std: 1.0,
                seed: 11,
            },
            m0: 128,
            n_add: 32,
            n_delete: 4,
            max_iterations: 300,
            coverage_target: None,
            label_budget: Some(896),
            warmup: 0,
            metric_every: 1,
            allow_shrinking: false,
            coverage_k: 50,
            addition_policy: PolicySpec::parse("entropy@rand2n").unwrap(),
            deletion_policy: PolicySpec::parse("rank_ensemble(entropy:1,diversity:1)@rand2n")
                .unwrap(),
            train: TrainConfig {
                learning_rate: 0.1,
                batch_size: 64,
                max_epochs: 10,
                patience: 5,
                retrain: RetrainMode::WarmStart,
                validation_fraction: 0.2,
            },
            embed_dim: 16,
            committee_size: 5,
            seed: 1,
            replications: 1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "kiba_paper" => Ok(Self::preset_kiba_paper()),
            "cifar_paper_surrogate" => Ok(Self::preset_cifar_paper_surrogate()),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset {other:?} (available: kiba_paper, cifar_paper_surrogate)"
            ))),
        }
    }

    /// Engine-facing view with the worker-thread cap applied.
    pub fn to_experiment(&self, threads: usize) -> ExperimentConfig {
        ExperimentConfig {
            m0: self.m0,
            n_add: self.n_add,
            n_delete: self.n_delete,
            max_iterations: self.max_iterations,
            coverage_target: self.coverage_target,
            label_budget: self.label_budget,
            addition_policy: self.addition_policy.clone(),
            deletion_policy: self.deletion_policy.clone(),
            train: self.train.clone(),
            committee_size: self.committee_size,
            seed: self.seed,
            metric_every: self.metric_every,
            warmup: self.warmup,
            allow_shrinking: self.allow_shrinking,
            coverage_k: self.coverage_k,
            embed_dim: self.embed_dim,
            threads,
        }
    }

    /// Canonical text form: fixed section and key order, so equal configs
    /// produce equal bytes. Parses back via [`apply_file_text`].
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        out.push_str("[dataset]\n");
        match &self.dataset {
            DatasetSpec::Bilinear {
                n_drugs,
                n_proteins,
                latent_rank,
                noise_std,
                seed,
            } => {
                let _ = writeln!(out, "kind = \"bilinear\"");
                let _ = writeln!(out, "n_drugs = {n_drugs}");
                let _ = writeln!(out, "n_proteins = {n_proteins}");
                let _ = writeln!(out, "latent_rank = {latent_rank}");
                let _ = writeln!(out, "noise_std = {noise_std}");
                let _ = writeln!(out, "seed = {seed}");
            }
            DatasetSpec::Blobs {
                classes,
                per_class,
                dim,
                center_spread,
                cluster_std,
                seed,
            } => {
                let _ = writeln!(out, "kind = \"blobs\"");
                let _ = writeln!(out, "classes = {classes}");
                let _ = writeln!(out, "per_class = {per_class}");
                let _ = writeln!(out, "dim = {dim}");
                let _ = writeln!(out, "center_spread = {center_spread}");
                let _ = writeln!(out, "cluster_std = {cluster_std}");
                let _ = writeln!(out, "seed = {seed}");
            }
            DatasetSpec::Table { path } => {
                let _ = writeln!(out, "kind = \"table\"");
                let _ = writeln!(out, "path = \"{}\"", path.display());
            }
        }
        out.push_str("\n[pool]\n");
        let _ = writeln!(out, "m0 = {}", self.m0);
        out.push_str("\n[engine]\n");
        let _ = writeln!(out, "n_add = {}", self.n_add);
        let _ = writeln!(out, "n_delete = {}", self.n_delete);
        let _ = writeln!(out, "max_iterations = {}", self.max_iterations);
        // 0 means "disabled" for both optional stop rules
        let _ = writeln!(out, "coverage_target = {}", self.coverage_target.unwrap_or(0.0));
        let _ = writeln!(out, "label_budget = {}", self.label_budget.unwrap_or(0));
        let _ = writeln!(out, "warmup = {}", self.warmup);
        let _ = writeln!(out, "metric_every = {}", self.metric_every);
        let _ = writeln!(out, "allow_shrinking = {}", self.allow_shrinking);
        out.push_str("\n[metrics]\n");
        let _ = writeln!(out, "coverage_k = {}", self.coverage_k);
        out.push_str("\n[policies]\n");
        let _ = writeln!(out, "addition = \"{}\"", self.addition_policy);
        let _ = writeln!(out, "deletion = \"{}\"", self.deletion_policy);
        out.push_str("\n[train]\n");
        let _ = writeln!(out, "learning_rate = {}", self.train.learning_rate);
        let _ = writeln!(out, "batch_size = {}", self.train.batch_size);
        let _ = writeln!(out, "max_epochs = {}", self.train.max_epochs);
        let _ = writeln!(out, "patience = {}", self.train.patience);
        let retrain = match self.train.retrain {
            RetrainMode::FromScratch => "from_scratch",
            RetrainMode::WarmStart => "warm_start",
        };
        let _ = writeln!(out, "retrain = \"{retrain}\"");
        let _ = writeln!(
            out,
            "validation_fraction = {}",
            self.train.validation_fraction
        );
        out.push_str("\n[learners]\n");
        let _ = writeln!(out, "embed_dim = {}", self.embed_dim);
        out.push_str("\n[committee]\n");
        let _ = writeln!(out, "size = {}", self.committee_size);
        out.push_str("\n[run]\n");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "replications = {}", self.replications);
        out
    }
}

/// A parsed `key = value` entry with its source line.
#[derive(Debug, Clone)]
struct RawValue {
    text: String,
    line: usize,
}

/// Sectioned raw entries.
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, RawValue>>,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "dataset",
        &[
            "kind",
            "n_drugs",
            "n_proteins",
            "latent_rank",
            "noise_std",
            "seed",
            "classes",
            "per_class",
            "dim",
            "center_spread",
            "cluster_std",
            "path",
        ],
    ),
    ("pool", &["m0"]),
    (
        "engine",
        &[
            "n_add",
            "n_delete",
            "max_iterations",
            "coverage_target",
            "label_budget",
            "warmup",
            "metric_every",
            "allow_shrinking",
        ],
    ),
    ("metrics", &["coverage_k"]),
    ("policies", &["addition", "deletion"]),
    (
        "train",
        &[
            "learning_rate",
            "batch_size",
            "max_epochs",
            "patience",
            "retrain",
            "validation_fraction",
        ],
    ),
    ("learners", &["embed_dim"]),
    ("committee", &["size"]),
    ("run", &["seed", "replications"]),
];

impl RawConfig {
    /// Parse the sectioned `key = value` format. Comments start with `#`;
    /// strings are double-quoted. Unknown sections or keys are errors with
    /// their line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, RawValue>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (offset, raw_line) in text.lines().enumerate() {
            let line_no = offset + 1;
            let line = strip_comment(raw_line).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "unknown section [{name}] (expected one of: {})",
                            KNOWN_KEYS
                                .iter()
                                .map(|(s, _)| *s)
                                .collect::<Vec<_>>()
                                .join(", ")
                        ),
                    });
                }
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            let section = current.clone().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "key outside of any [section]".into(),
            })?;
            let key = key.trim().to_string();
            let known = KNOWN_KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| keys.contains(&key.as_str()))
                .unwrap_or(false);
            if !known {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown key {key:?} in section [{section}]"),
                });
            }
            sections.get_mut(&section).unwrap().insert(
                key,
                RawValue {
                    text: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(Self { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawValue> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

fn bad_value(raw: &RawValue, expected: &str) -> Error {
    Error::Parse {
        line: raw.line,
        message: format!("expected {expected}, got {:?}", raw.text),
    }
}

fn parse_string(raw: &RawValue) -> Result<String> {
    let t = raw.text.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        Ok(t[1..t.len() - 1].to_string())
    } else {
        Err(bad_value(raw, "a double-quoted string"))
    }
}

fn parse_u64(raw: &RawValue) -> Result<u64> {
    raw.text.trim().parse().map_err(|_| bad_value(raw, "an integer"))
}

fn parse_usize(raw: &RawValue) -> Result<usize> {
    raw.text.trim().parse().map_err(|_| bad_value(raw, "an integer"))
}

fn parse_u32(raw: &RawValue) -> Result<u32> {
    raw.text.trim().parse().map_err(|_| bad_value(raw, "an integer"))
}

fn parse_f64(raw: &RawValue) -> Result<f64> {
    raw.text.trim().parse().map_err(|_| bad_value(raw, "a number"))
}

fn parse_bool(raw: &RawValue) -> Result<bool> {
    match raw.text.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad_value(raw, "true or false")),
    }
}

fn parse_policy(raw: &RawValue) -> Result<PolicySpec> {
    let text = parse_string(raw)?;
    PolicySpec::parse(&text).map_err(|e| Error::Parse {
        line: raw.line,
        message: e.to_string(),
    })
}

/// Apply a config file's entries on top of `base`.
pub fn apply_file_text(base: &mut ResolvedConfig, text: &str) -> Result<()> {
    let raw = RawConfig::parse(text)?;

    if raw.has_section("dataset") {
        apply_dataset(base, &raw)?;
    }
    if let Some(v) = raw.get("pool", "m0") {
        base.m0 = parse_usize(v)?;
    }
    if let Some(v) = raw.get("engine", "n_add") {
        base.n_add = parse_usize(v)?;
    }
    if let Some(v) = raw.get("engine", "n_delete") {
        base.n_delete = parse_usize(v)?;
    }
    if let Some(v) = raw.get("engine", "max_iterations") {
        base.max_iterations = parse_u32(v)?;
    }
    if let Some(v) = raw.get("engine", "coverage_target") {
        let t = parse_f64(v)?;
        base.coverage_target = if t == 0.0 { None } else { Some(t) };
    }
    if let Some(v) = raw.get("engine", "label_budget") {
        let b = parse_usize(v)?;
        base.label_budget = if b == 0 { None } else { Some(b) };
    }
    if let Some(v) = raw.get("engine", "warmup") {
        base.warmup = parse_u32(v)?;
    }
    if let Some(v) = raw.get("engine", "metric_every") {
        base.metric_every = parse_u32(v)?;
    }
    if let Some(v) = raw.get("engine", "allow_shrinking") {
        base.allow_shrinking = parse_bool(v)?;
    }
    if let Some(v) = raw.get("metrics", "coverage_k") {
        base.coverage_k = parse_usize(v)?;
    }
    if let Some(v) = raw.get("policies", "addition") {
        base.addition_policy = parse_policy(v)?;
    }
    if let Some(v) = raw.get("policies", "deletion") {
        base.deletion_policy = parse_policy(v)?;
    }
    if let Some(v) = raw.get("train", "learning_rate") {
        base.train.learning_rate = parse_f64(v)?;
    }
    if let Some(v) = raw.get("train", "batch_size") {
        base.train.batch_size = parse_usize(v)?;
    }
    if let Some(v) = raw.get("train", "max_epochs") {
        base.train.max_epochs = parse_usize(v)?;
    }
    if let Some(v) = raw.get("train", "patience") {
        base.train.patience = parse_usize(v)?;
    }
    if let Some(v) = raw.get("train", "retrain") {
        base.train.retrain = match parse_string(v)?.as_str() {
            "from_scratch" => RetrainMode::FromScratch,
            "warm_start" => RetrainMode::WarmStart,
            other => {
                return Err(Error::Parse {
                    line: v.line,
                    message: format!(
                        "retrain must be \"from_scratch\" or \"warm_start\", got {other:?}"
                    ),
                })
            }
        };
    }
    if let Some(v) = raw.get("train", "validation_fraction") {
        base.train.validation_fraction = parse_f64(v)?;
    }
    if let Some(v) = raw.get("learners", "embed_dim") {
        base.embed_dim = parse_usize(v)?;
    }
    if let Some(v) = raw.get("committee", "size") {
        base.committee_size = parse_usize(v)?;
    }
    if let Some(v) = raw.get("run", "seed") {
        base.seed = parse_u64(v)?;
    }
    if let Some(v) = raw.get("run", "replications") {
        base.replications = parse_usize(v)?;
    }
    Ok(())
}

fn apply_dataset(base: &mut ResolvedConfig, raw: &RawConfig) -> Result<()> {
    let kind = match raw.get("dataset", "kind") {
        Some(v) => parse_string(v)?,
        // no kind: tweak fields of the current dataset in place
        None => match &base.dataset {
            DatasetSpec::Bilinear { .. } => "bilinear".to_string(),
            DatasetSpec::Blobs { .. } => "blobs".to_string(),
            DatasetSpec::Table { .. } => "table".to_string(),
        },
    };
    let get_usize = |key: &str, default: usize| -> Result<usize> {
        raw.get("dataset", key).map(parse_usize).unwrap_or(Ok(default))
    };
    let get_f64 = |key: &str, default: f64| -> Result<f64> {
        raw.get("dataset", key).map(parse_f64).unwrap_or(Ok(default))
    };
    let get_u64 = |key: &str, default: u64| -> Result<u64> {
        raw.get("dataset", key).map(parse_u64).unwrap_or(Ok(default))
    };
    base.dataset = match kind.as_str() {
        "bilinear" => {
            let defaults = match &base.dataset {
                DatasetSpec::Bilinear {
                    n_drugs,
                    n_proteins,
                    latent_rank,
                    noise_std,
                    seed,
                } => (*n_drugs, *n_proteins, *latent_rank, *noise_std, *seed),
                _ => (50, 30, 4, 0.1, 7),
            };
            DatasetSpec::Bilinear {
                n_drugs: get_usize("n_drugs", defaults.0)?,
                n_proteins: get_usize("n_proteins", defaults.1)?,
                latent_rank: get_usize("latent_rank", defaults.2)?,
                noise_std: get_f64("noise_std", defaults.3)?,
                seed: get_u64("seed", defaults.4)?,
            }
        }
        "blobs" => {
            let defaults = match &base.dataset {
                DatasetSpec::Blobs {
                    classes,
                    per_class,
                    dim,
                    center_spread,
                    cluster_std,
                    seed,
                } => (*classes, *per_class, *dim, *center_spread, *cluster_std, *seed),
                _ => (10, 200, 6, 3.0, 1.0, 11),
            };
            DatasetSpec::Blobs {
                classes: get_usize("classes", defaults.0)?,
                per_class: get_usize("per_class", defaults.1)?,
                dim: get_usize("dim", defaults.2)?,
                center_spread: get_f64("center_spread", defaults.3)?,
                cluster_std: get_f64("cluster_std", defaults.4)?,
                seed: get_u64("seed", defaults.5)?,
            }
        }
        "table" => {
            let path = match raw.get("dataset", "path") {
                Some(v) => PathBuf::from(parse_string(v)?),
                None => match &base.dataset {
                    DatasetSpec::Table { path } => path.clone(),
                    _ => {
                        return Err(Error::InvalidConfig(
                            "dataset kind \"table\" requires a path".into(),
                        ))
                    }
                },
            };
            DatasetSpec::Table { path }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown dataset kind {other:?} (bilinear, blobs, table)"
            )))
        }
    };
    Ok(())
}

/// Command-line overrides applied after preset and file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub add_policy: Option<String>,
    pub del_policy: Option<String>,
}

/// Resolve a run configuration: defaults <- preset <- file <- flags.
pub fn resolve(
    preset: Option<&str>,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<ResolvedConfig> {
    let mut cfg = match preset {
        Some(name) => ResolvedConfig::preset(name)?,
        None => ResolvedConfig::desk_default(),
    };
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        apply_file_text(&mut cfg, &text)?;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = overrides.replications {
        cfg.replications = reps;
    }
    if let Some(spec) = &overrides.add_policy {
        cfg.addition_policy = PolicySpec::parse(spec)?;
    }
    if let Some(spec) = &overrides.del_policy {
        cfg.deletion_policy = PolicySpec::parse(spec)?;
    }
    if cfg.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    Ok(cfg)
}
