//! The adaptive acquisition loop.
//!
//! Each iteration retrains a committee on the current labeled pool, scores
//! the unlabeled candidates, adds the top `n_add`, scores the labeled pool
//! and deletes the bottom `n_delete`, then evaluates the committee on the
//! full dataset. With `n_delete = 0` the loop reduces to plain active
//! learning; with a random addition policy it degrades to the supervised
//! baseline. Runs are deterministic per seed and log every event, so a
//! trajectory can be replayed and analyzed offline.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::learners::{
    sample_ref, train_committee, training_examples, Committee, LearnerFamily, TrainConfig,
};
use crate::metrics::{accuracy, coverage_score, LabelHistogrammer, AFFINITY_HISTOGRAM_BUCKETS};
use crate::policies::{select_addition, select_deletion, PolicySpec, ScoreContext};
use crate::pool::{PoolState, SampleId};
use crate::seed::{mix_seed, STREAM_FIT, STREAM_SELECT_ADD, STREAM_SELECT_DELETE};

/// Full experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Initial random pool size.
    pub m0: usize,
    /// Samples added per iteration.
    pub n_add: usize,
    /// Samples deleted per iteration (0 disables deletion).
    pub n_delete: usize,
    pub max_iterations: u32,
    /// Stop once the primary metric first reaches this value.
    pub coverage_target: Option<f64>,
    /// Stop once the labeled pool reaches this size.
    pub label_budget: Option<usize>,
    pub addition_policy: PolicySpec,
    pub deletion_policy: PolicySpec,
    pub train: TrainConfig,
    pub committee_size: usize,
    pub seed: u64,
    /// Evaluate the metric every this many iterations.
    pub metric_every: u32,
    /// Skip deletion for the first `warmup` iterations.
    pub warmup: u32,
    /// Permit `n_delete >= n_add` (a shrinking or static pool).
    pub allow_shrinking: bool,
    /// Top-k size for the coverage metric (affinity tasks).
    pub coverage_k: usize,
    /// Embedding width of the bilinear learner.
    pub embed_dim: usize,
    /// Worker threads for committee training; results are thread-count
    /// independent.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.m0 == 0 || self.m0 > dataset.len() {
            return Err(Error::InvalidConfig(format!(
                "m0 = {} must lie in 1..={}",
                self.m0,
                dataset.len()
            )));
        }
        if self.n_add == 0 {
            return Err(Error::InvalidConfig("n_add must be >= 1".into()));
        }
        if self.n_delete >= self.n_add && !self.allow_shrinking {
            return Err(Error::InvalidConfig(format!(
                "n_delete = {} >= n_add = {} would keep the pool from growing \
                 (set allow_shrinking to override)",
                self.n_delete, self.n_add
            )));
        }
        if let Some(t) = self.coverage_target {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "coverage_target {t} must lie in (0, 1]"
                )));
            }
        }
        if self.committee_size < 2 {
            return Err(Error::InvalidConfig(
                "committee_size must be >= 2".into(),
            ));
        }
        if self.metric_every == 0 {
            return Err(Error::InvalidConfig("metric_every must be >= 1".into()));
        }
        self.train.validate()?;
        self.addition_policy.validate_for_task(dataset.task())?;
        if let Some(total) = self.addition_policy.hybrid_total() {
            if total != self.n_add {
                return Err(Error::InvalidConfig(format!(
                    "addition hybrid parts sum to {total}, n_add is {}",
                    self.n_add
                )));
            }
        }
        if self.n_delete > 0 {
            self.deletion_policy.validate_for_task(dataset.task())?;
        }
        if dataset.task() == TaskKind::Affinity {
            crate::metrics::CoverageSpec { k: self.coverage_k }.validate(dataset.len())?;
            if self.embed_dim == 0 {
                return Err(Error::InvalidConfig("embed_dim must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    /// The primary metric reached the configured target.
    TargetReached { iteration: u32 },
    /// The labeled pool reached the label budget.
    BudgetReached { iteration: u32 },
    /// The unlabeled pool ran dry.
    PoolExhausted { iteration: u32 },
    /// The iteration cap was hit.
    MaxIterations,
    /// T = 0: only the initial pool was logged.
    NotRun,
    /// Training produced non-finite values; the log is partial.
    Diverged { iteration: u32, message: String },
}

/// One iteration's record. Record 0 holds the initial pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Ids added this iteration, ascending (iteration 0: the initial pool).
    pub added: Vec<SampleId>,
    /// Ids deleted this iteration, ascending.
    pub deleted: Vec<SampleId>,
    /// Labeled pool size after the iteration.
    pub labeled_size: usize,
    /// Cumulative labels acquired from the oracle (the labeling cost).
    pub acquired_total: usize,
    /// Primary metric (coverage or accuracy), when evaluated.
    pub metric: Option<f64>,
    /// Label histogram of the labeled pool after the iteration.
    pub label_histogram: Vec<u64>,
    /// Measured wall time of the iteration. Diagnostic only: excluded from
    /// determinism comparisons.
    pub wall_ms: u64,
}

/// Complete record of one run.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub task: TaskKind,
    pub dataset_size: usize,
    pub m0: usize,
    pub n_add: usize,
    pub n_delete: usize,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub outcome: RunOutcome,
    /// Pool state at the end of the run.
    pub final_pool: PoolState,
    /// Committee trained in the last completed iteration.
    pub final_committee: Option<Committee>,
}

impl TrajectoryLog {
    pub fn last_iteration(&self) -> u32 {
        self.records.last().map(|r| r.iteration).unwrap_or(0)
    }

    /// First record whose metric reached `target`.
    pub fn first_reach(&self, target: f64) -> Option<&IterationRecord> {
        self.records
            .iter()
            .find(|r| r.metric.is_some_and(|m| m >= target))
    }

    /// Record for a given iteration (records are consecutive from 0).
    pub fn record(&self, iteration: u32) -> Option<&IterationRecord> {
        self.records.get(iteration as usize)
    }

    /// `iteration,labeled_size,metric,wall_ms` rows. The wall_ms column is
    /// measured time; all other columns are deterministic per seed.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from("iteration,labeled_size,metric,wall_ms\n");
        for r in &self.records {
            let metric = r.metric.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.labeled_size, metric, r.wall_ms
            );
        }
        out
    }

    /// `iteration,event,sample_id` rows; adds before deletes within an
    /// iteration, each in ascending id order. Replaying them from an empty
    /// pool reconstructs the final pool state.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("iteration,event,sample_id\n");
        for r in &self.records {
            for id in &r.added {
                let _ = writeln!(out, "{},add,{}", r.iteration, id);
            }
            for id in &r.deleted {
                let _ = writeln!(out, "{},delete,{}", r.iteration, id);
            }
        }
        out
    }

    /// Rebuild the pool by replaying the logged events from an empty pool.
    pub fn replay_pool(&self) -> Result<PoolState> {
        let mut pool = PoolState::empty(self.dataset_size);
        for r in &self.records {
            if r.iteration != pool.iteration() {
                if r.iteration != pool.iteration() + 1 {
                    return Err(Error::MalformedEvents(format!(
                        "iteration {} follows {}",
                        r.iteration,
                        pool.iteration()
                    )));
                }
                pool.advance_iteration();
            }
            let add: BTreeSet<SampleId> = r.added.iter().copied().collect();
            let del: BTreeSet<SampleId> = r.deleted.iter().copied().collect();
            pool.add_batch(&add)?;
            pool.delete_batch(&del)?;
        }
        Ok(pool)
    }

    /// Reconstruct a log from an `events.csv` body and the dataset it was
    /// produced from. Pool sizes and label histograms are rebuilt by
    /// replaying the events; metrics and timings are not recoverable.
    pub fn from_events_csv(text: &str, dataset: &Dataset) -> Result<TrajectoryLog> {
        let mut lines = text.lines();
        match lines.next() {
            Some("iteration,event,sample_id") => {}
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("bad events header {other:?}"),
                })
            }
        }
        let histogrammer = match dataset {
            Dataset::Affinity(d) => LabelHistogrammer::for_affinity(d, AFFINITY_HISTOGRAM_BUCKETS),
            Dataset::Classification(d) => LabelHistogrammer::for_classification(d),
        };

        struct PendingEvents {
            added: Vec<SampleId>,
            deleted: Vec<SampleId>,
        }
        let mut per_iteration: Vec<PendingEvents> = Vec::new();
        for (offset, line) in lines.enumerate() {
            let line_no = offset + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected iteration,event,sample_id".into(),
                });
            }
            let iteration: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad iteration {:?}", fields[0]),
            })?;
            let id: usize = fields[2].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad sample id {:?}", fields[2]),
            })?;
            while per_iteration.len() <= iteration {
                per_iteration.push(PendingEvents {
                    added: Vec::new(),
                    deleted: Vec::new(),
                });
            }
            match fields[1] {
                "add" => per_iteration[iteration].added.push(SampleId(id)),
                "delete" => per_iteration[iteration].deleted.push(SampleId(id)),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown event {other:?}"),
                    })
                }
            }
        }
        if per_iteration.is_empty() {
            return Err(Error::MalformedEvents("no events".into()));
        }

        let mut pool = PoolState::empty(dataset.len());
        let mut records = Vec::with_capacity(per_iteration.len());
        let mut acquired_total = 0usize;
        for (t, pending) in per_iteration.iter().enumerate() {
            if t > 0 {
                pool.advance_iteration();
            }
            let add: BTreeSet<SampleId> = pending.added.iter().copied().collect();
            let del: BTreeSet<SampleId> = pending.deleted.iter().copied().collect();
            acquired_total += add.len();
            pool.add_batch(&add)
                .map_err(|e| Error::MalformedEvents(e.to_string()))?;
            pool.delete_batch(&del)
                .map_err(|e| Error::MalformedEvents(e.to_string()))?;
            records.push(IterationRecord {
                iteration: t as u32,
                added: add.into_iter().collect(),
                deleted: del.into_iter().collect(),
                labeled_size: pool.labeled_len(),
                acquired_total,
                metric: None,
                label_histogram: labeled_histogram(&histogrammer, dataset, &pool)?,
                wall_ms: 0,
            });
        }
        let m0 = records[0].added.len();
        let (n_add, n_delete) = records
            .get(1)
            .map(|r| (r.added.len(), r.deleted.len()))
            .unwrap_or((0, 0));
        Ok(TrajectoryLog {
            task: dataset.task(),
            dataset_size: dataset.len(),
            m0,
            n_add,
            n_delete,
            seed: 0,
            records,
            outcome: RunOutcome::MaxIterations,
            final_pool: pool,
            final_committee: None,
        })
    }
}

fn is_divergence(err: &Error) -> bool {
    match err {
        Error::TrainingDiverged(_) => true,
        Error::CommitteeMember { source, .. } => is_divergence(source),
        _ => false,
    }
}

/// Committee-mean metric over the full dataset: top-k coverage for affinity
/// tasks, argmax accuracy for classification.
pub fn evaluate_metric(
    dataset: &Dataset,
    committee: &Committee,
    coverage_k: usize,
) -> Result<f64> {
    match dataset {
        Dataset::Affinity(d) => {
            let mut preds = Vec::with_capacity(d.len());
            for id in 0..d.len() {
                preds.push(committee.mean_prediction(sample_ref(dataset, SampleId(id))?)?);
            }
            coverage_score(&preds, d.scores(), coverage_k)
        }
        Dataset::Classification(d) => {
            let mut predicted = Vec::with_capacity(d.len());
            for id in 0..d.len() {
                let probs = committee.mean_probability(sample_ref(dataset, SampleId(id))?)?;
                let mut best = 0;
                for (k, &p) in probs.iter().enumerate() {
                    if p > probs[best] {
                        best = k;
                    }
                }
                predicted.push(best);
            }
            accuracy(&predicted, d.labels())
        }
    }
}

fn labeled_histogram(
    histogrammer: &LabelHistogrammer,
    dataset: &Dataset,
    pool: &PoolState,
) -> Result<Vec<u64>> {
    let values = pool
        .labeled_ids()
        .into_iter()
        .map(|id| dataset.label(id.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(histogrammer.histogram(values))
}

/// Run the adaptive add/delete loop. Training divergence ends the run with
/// a partial log flagged [`RunOutcome::Diverged`]; configuration problems
/// are hard errors.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<TrajectoryLog> {
    config.validate(dataset)?;
    let family = LearnerFamily::for_dataset(dataset, config.embed_dim);
    let histogrammer = match dataset {
        Dataset::Affinity(d) => LabelHistogrammer::for_affinity(d, AFFINITY_HISTOGRAM_BUCKETS),
        Dataset::Classification(d) => LabelHistogrammer::for_classification(d),
    };

    let mut pool = PoolState::init(dataset.len(), config.m0, config.seed)?;
    let mut acquired_total = config.m0;
    let mut log = TrajectoryLog {
        task: dataset.task(),
        dataset_size: dataset.len(),
        m0: config.m0,
        n_add: config.n_add,
        n_delete: config.n_delete,
        seed: config.seed,
        records: vec![IterationRecord {
            iteration: 0,
            added: pool.labeled_ids(),
            deleted: Vec::new(),
            labeled_size: pool.labeled_len(),
            acquired_total,
            metric: None,
            label_histogram: labeled_histogram(&histogrammer, dataset, &pool)?,
            wall_ms: 0,
        }],
        outcome: RunOutcome::NotRun,
        final_pool: pool.clone(),
        final_committee: None,
    };
    if config.max_iterations == 0 {
        return Ok(log);
    }
    log.outcome = RunOutcome::MaxIterations;

    let mut committee_prev: Option<Committee> = None;
    for t in 1..=config.max_iterations {
        if pool.unlabeled_len() == 0 {
            log.outcome = RunOutcome::PoolExhausted { iteration: t - 1 };
            break;
        }
        let started = Instant::now();

        // Retrain on the labeled pool as it stands after the previous
        // iteration's deletion. Warm start only applies once a previous
        // committee exists; the first cycle always trains from scratch.
        // The iteration counter advances only after training succeeds, so a
        // diverged run leaves the pool exactly as its last record shows.
        let labeled = pool.labeled_ids();
        let examples = training_examples(dataset, &labeled)?;
        let mut train_cfg = config.train.clone();
        if committee_prev.is_none() {
            train_cfg.retrain = crate::learners::RetrainMode::FromScratch;
        }
        let committee = match train_committee(
            &family,
            &examples,
            &train_cfg,
            config.committee_size,
            mix_seed(config.seed, STREAM_FIT, t as u64),
            committee_prev.as_ref(),
            config.threads,
        ) {
            Ok(c) => c,
            Err(e) if is_divergence(&e) => {
                log.outcome = RunOutcome::Diverged {
                    iteration: t,
                    message: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        pool.advance_iteration();

        // Addition: top n_add over the unlabeled pool.
        let candidates = pool.unlabeled_ids();
        let ctx = ScoreContext {
            dataset,
            committee: &committee,
            labeled: &labeled,
        };
        let selection = select_addition(
            &config.addition_policy,
            &ctx,
            &candidates,
            config.n_add,
            mix_seed(config.seed, STREAM_SELECT_ADD, t as u64),
        )?;
        let labels = crate::pool::query_labels(dataset, &selection.ids)?;
        acquired_total += labels.len();
        pool.add_batch(&selection.ids)?;

        // Deletion: bottom n_delete of the existing labeled pool, scored by
        // the same committee. This iteration's additions are not deletion
        // candidates, so every deletion points at a strictly earlier
        // addition.
        let mut deleted = BTreeSet::new();
        if config.n_delete > 0 && t > config.warmup {
            let labeled_now = pool.labeled_ids();
            let deletable: Vec<SampleId> = labeled_now
                .iter()
                .copied()
                .filter(|id| !selection.ids.contains(id))
                .collect();
            if config.n_delete < deletable.len() {
                let ctx = ScoreContext {
                    dataset,
                    committee: &committee,
                    labeled: &labeled_now,
                };
                deleted = select_deletion(
                    &config.deletion_policy,
                    &ctx,
                    &deletable,
                    config.n_delete,
                    mix_seed(config.seed, STREAM_SELECT_DELETE, t as u64),
                )?;
                pool.delete_batch(&deleted)?;
            }
        }

        let metric = if t % config.metric_every == 0 {
            Some(evaluate_metric(dataset, &committee, config.coverage_k)?)
        } else {
            None
        };

        log.records.push(IterationRecord {
            iteration: t,
            added: selection.ids.iter().copied().collect(),
            deleted: deleted.iter().copied().collect(),
            labeled_size: pool.labeled_len(),
            acquired_total,
            metric,
            label_histogram: labeled_histogram(&histogrammer, dataset, &pool)?,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        committee_prev = Some(committee);

        if let (Some(target), Some(m)) = (config.coverage_target, metric) {
            if m >= target {
                log.outcome = RunOutcome::TargetReached { iteration: t };
                break;
            }
        }
        if let Some(budget) = config.label_budget {
            if pool.labeled_len() >= budget {
                log.outcome = RunOutcome::BudgetReached { iteration: t };
                break;
            }
        }
        if selection.exhausted || pool.unlabeled_len() == 0 {
            log.outcome = RunOutcome::PoolExhausted { iteration: t };
            break;
        }
    }

    log.final_pool = pool;
    log.final_committee = committee_prev;
    Ok(log)
}

/// The unbiased baseline: uniform-random additions, no deletion. The model
/// is still retrained each iteration so metrics stay comparable.
pub fn run_random_baseline(dataset: &Dataset, config: &ExperimentConfig) -> Result<TrajectoryLog> {
    let mut cfg = config.clone();
    cfg.addition_policy = PolicySpec::simple(crate::policies::PolicyKind::Random);
    cfg.n_delete = 0;
    run_experiment(dataset, &cfg)
}

/// Per-iteration metric summary across replicated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: u32,
    pub mean_metric: f64,
    pub std_metric: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub rows: Vec<SummaryRow>,
}

impl ReplicationSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mean_metric,std_metric,runs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.mean_metric, r.std_metric, r.runs
            );
        }
        out
    }
}

/// Run `n_runs` replications with seeds `seed + i` and summarize the metric
/// per iteration (mean and population std across runs). Runs that stopped
/// early carry their final metric forward, mirroring how stop-on-target
/// curves are compared.
pub fn run_replication(
    dataset: &Dataset,
    config: &ExperimentConfig,
    n_runs: usize,
) -> Result<(Vec<TrajectoryLog>, ReplicationSummary)> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be >= 1".into()));
    }
    let mut logs = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(i as u64);
        logs.push(run_experiment(dataset, &cfg)?);
    }
    let summary = summarize(&logs);
    Ok((logs, summary))
}

/// Mean ± std of the metric per iteration over a set of runs.
pub fn summarize(logs: &[TrajectoryLog]) -> ReplicationSummary {
    let max_iter = logs.iter().map(|l| l.last_iteration()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for t in 1..=max_iter {
        let mut values = Vec::new();
        for log in logs {
            // metric at t, else the last one evaluated before t, carried
            // forward past the end of a stopped run
            let mut latest = None;
            for r in &log.records {
                if r.iteration > t {
                    break;
                }
                if let Some(m) = r.metric {
                    latest = Some(m);
                }
            }
            if log.last_iteration() <= t {
                if let Some(m) = log.records.iter().rev().find_map(|r| r.metric) {
                    latest = Some(m);
                }
            }
            if let Some(m) = latest {
                values.push(m);
            }
        }
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        rows.push(SummaryRow {
            iteration: t,
            mean_metric: mean,
            std_metric: var.sqrt(),
            runs: values.len(),
        });
    }
    ReplicationSummary { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_bilinear_affinity;

    fn small_dataset() -> Dataset {
        Dataset::Affinity(generate_bilinear_affinity(12, 10, 2, 0.05, 42).unwrap())
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            m0: 8,
            n_add: 8,
            n_delete: 2,
            max_iterations: 4,
            coverage_target: None,
            label_budget: None,
            addition_policy: PolicySpec::parse("hybrid(greedy:4,variance:4)").unwrap(),
            deletion_policy: PolicySpec::parse("hybrid(greedy:4,variance:4)").unwrap(),
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 16,
                max_epochs: 8,
                patience: 8,
                ..TrainConfig::default()
            },
            committee_size: 2,
            seed: 5,
            metric_every: 1,
            warmup: 0,
            allow_shrinking: false,
            coverage_k: 10,
            embed_dim: 4,
            threads: 1,
        }
    }

    #[test]
    fn pool_size_law_holds() {
        let data = small_dataset();
        let cfg = small_config();
        let log = run_experiment(&data, &cfg).unwrap();
        assert_eq!(log.outcome, RunOutcome::MaxIterations);
        for r in &log.records {
            let expected = cfg.m0 + r.iteration as usize * (cfg.n_add - cfg.n_delete);
            assert_eq!(r.labeled_size, expected, "iteration {}", r.iteration);
            assert_eq!(
                r.acquired_total,
                cfg.m0 + r.iteration as usize * cfg.n_add
            );
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let data = small_dataset();
        let cfg = small_config();
        let a = run_experiment(&data, &cfg).unwrap();
        let b = run_experiment(&data, &cfg).unwrap();
        assert_eq!(a.events_csv(), b.events_csv());
        assert_eq!(a.records, b.records.iter().cloned().map(|mut r| {
            // wall time is measured, not deterministic
            r.wall_ms = a.records[r.iteration as usize].wall_ms;
            r
        }).collect::<Vec<_>>());
    }

    #[test]
    fn zero_iterations_logs_only_initial_pool() {
        let data = small_dataset();
        let mut cfg = small_config();
        cfg.max_iterations = 0;
        let log = run_experiment(&data, &cfg).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.outcome, RunOutcome::NotRun);
        assert_eq!(log.records[0].labeled_size, cfg.m0);
        assert!(log.records[0].metric.is_none());
    }

    #[test]
    fn first_iteration_additions_ignore_deletion_setting() {
        let data = small_dataset();
        let mut with_del = small_config();
        with_del.max_iterations = 1;
        let mut without_del = with_del.clone();
        without_del.n_delete = 0;

        let a = run_experiment(&data, &with_del).unwrap();
        let b = run_experiment(&data, &without_del).unwrap();
        assert_eq!(a.records[1].added, b.records[1].added);
        assert!(!a.records[1].deleted.is_empty());
        assert!(b.records[1].deleted.is_empty());
    }

    #[test]
    fn pool_exhaustion_stops_gracefully() {
        let data = small_dataset(); // 120 samples
        let mut cfg = small_config();
        cfg.n_delete = 0;
        cfg.n_add = 50;
        cfg.addition_policy = PolicySpec::parse("greedy").unwrap();
        cfg.max_iterations = 10;
        let log = run_experiment(&data, &cfg).unwrap();
        assert!(matches!(log.outcome, RunOutcome::PoolExhausted { .. }));
        assert_eq!(log.final_pool.labeled_len(), 120);
    }

    #[test]
    fn replay_reconstructs_final_pool() {
        let data = small_dataset();
        let log = run_experiment(&data, &small_config()).unwrap();
        let replayed = log.replay_pool().unwrap();
        assert_eq!(replayed, log.final_pool);
    }

    #[test]
    fn events_csv_round_trips_through_reconstruction() {
        let data = small_dataset();
        let log = run_experiment(&data, &small_config()).unwrap();
        let rebuilt = TrajectoryLog::from_events_csv(&log.events_csv(), &data).unwrap();
        assert_eq!(rebuilt.events_csv(), log.events_csv());
        assert_eq!(rebuilt.final_pool, log.final_pool);
        for (a, b) in rebuilt.records.iter().zip(&log.records) {
            assert_eq!(a.labeled_size, b.labeled_size);
            assert_eq!(a.acquired_total, b.acquired_total);
            assert_eq!(a.label_histogram, b.label_histogram);
        }
    }

    #[test]
    fn budget_stop() {
        let data = small_dataset();
        let mut cfg = small_config();
        cfg.label_budget = Some(20);
        cfg.max_iterations = 50;
        let log = run_experiment(&data, &cfg).unwrap();
        assert!(matches!(log.outcome, RunOutcome::BudgetReached { .. }));
        assert!(log.final_pool.labeled_len() >= 20);
        // one iteration adds 6 net: 8 -> 14 -> 20
        assert_eq!(log.last_iteration(), 2);
    }

    #[test]
    fn stop_on_target_is_first_reach_and_final() {
        let data = Dataset::Affinity(generate_bilinear_affinity(30, 20, 3, 0.1, 8).unwrap());
        let mut cfg = small_config();
        cfg.coverage_target = Some(0.25);
        cfg.coverage_k = 30;
        cfg.max_iterations = 80;
        cfg.n_add = 12;
        cfg.n_delete = 2;
        cfg.addition_policy = PolicySpec::parse("hybrid(greedy:6,variance:6)").unwrap();
        cfg.deletion_policy = cfg.addition_policy.clone();
        let log = run_experiment(&data, &cfg).unwrap();
        match log.outcome {
            RunOutcome::TargetReached { iteration } => {
                let hit = log.first_reach(0.25).expect("a record reached the target");
                assert_eq!(hit.iteration, iteration);
                // the reaching record is the last one: no further iterations
                assert_eq!(log.last_iteration(), iteration);
                // and no earlier record reached it
                for r in &log.records {
                    if r.iteration < iteration {
                        assert!(r.metric.is_none_or(|m| m < 0.25));
                    }
                }
            }
            ref other => panic!("expected target stop, got {other:?}"),
        }
    }

    #[test]
    fn random_baseline_is_deletion_free() {
        let data = small_dataset();
        let log = run_random_baseline(&data, &small_config()).unwrap();
        for r in &log.records {
            assert!(r.deleted.is_empty());
        }
    }

    #[test]
    fn replication_summary_matches_manual_average() {
        let data = small_dataset();
        let mut cfg = small_config();
        cfg.max_iterations = 3;
        let (logs, summary) = run_replication(&data, &cfg, 3).unwrap();
        assert_eq!(logs.len(), 3);
        let row = &summary.rows[1]; // iteration 2
        let manual: Vec<f64> = logs
            .iter()
            .map(|l| l.record(2).unwrap().metric.unwrap())
            .collect();
        let mean = manual.iter().sum::<f64>() / manual.len() as f64;
        assert!((row.mean_metric - mean).abs() < 1e-12);

        let (_, single) = run_replication(&data, &cfg, 1).unwrap();
        for row in &single.rows {
            assert_eq!(row.std_metric, 0.0);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = small_dataset();
        let mut cfg = small_config();
        cfg.n_delete = 8; // == n_add
        assert!(run_experiment(&data, &cfg).is_err());

        let mut cfg = small_config();
        cfg.coverage_target = Some(1.5);
        assert!(run_experiment(&data, &cfg).is_err());

        let mut cfg = small_config();
        cfg.addition_policy = PolicySpec::parse("entropy").unwrap();
        assert!(run_experiment(&data, &cfg).is_err());

        let mut cfg = small_config();
        cfg.addition_policy = PolicySpec::parse("hybrid(greedy:3,variance:4)").unwrap();
        assert!(run_experiment(&data, &cfg).is_err());
    }
}
