//! Post-hoc trajectory analytics.
//!
//! Everything here is pure post-processing over an immutable
//! [`TrajectoryLog`]: the ranked exploration grid, the deletion-origin
//! graph, and the label-distribution shift series. Each analysis exports a
//! small CSV; rendering is left to external tools.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::datasets::Dataset;
use crate::engine::TrajectoryLog;
use crate::error::{Error, Result};
use crate::metrics::checkpoint_kl;
use crate::pool::SampleId;

/// Exploration event type in grid exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEvent {
    Add,
    Delete,
}

/// One explored cell in ranked-grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub iteration: u32,
    /// Position of the drug on the ascending-mean-affinity axis.
    pub grid_x: usize,
    /// Position of the protein on the ascending-mean-affinity axis.
    pub grid_y: usize,
    pub event: GridEvent,
}

/// Drugs and proteins ordered by mean ground-truth affinity, with every
/// logged add/delete mapped into grid coordinates. High-affinity pairs sit
/// at large (x, y) — the top-right of a rendered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedGrid {
    /// Drug indices sorted by ascending mean affinity (ties by index).
    pub drug_order: Vec<usize>,
    /// Protein indices sorted likewise.
    pub protein_order: Vec<usize>,
    pub cells: Vec<GridCell>,
}

fn ascending_order_by_mean(means: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap().then(a.cmp(&b)));
    order
}

fn inverse_permutation(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; order.len()];
    for (pos, &idx) in order.iter().enumerate() {
        inv[idx] = pos;
    }
    inv
}

impl RankedGrid {
    /// Map a grid cell back to the original (drug, protein) indices.
    pub fn cell_to_pair(&self, grid_x: usize, grid_y: usize) -> Result<(usize, usize)> {
        let d = *self
            .drug_order
            .get(grid_x)
            .ok_or_else(|| Error::InvalidInput(format!("grid_x {grid_x} out of range")))?;
        let p = *self
            .protein_order
            .get(grid_y)
            .ok_or_else(|| Error::InvalidInput(format!("grid_y {grid_y} out of range")))?;
        Ok((d, p))
    }

    /// `iteration,grid_x,grid_y,event` rows in log order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,grid_x,grid_y,event\n");
        for c in &self.cells {
            let event = match c.event {
                GridEvent::Add => "add",
                GridEvent::Delete => "delete",
            };
            let _ = writeln!(out, "{},{},{},{}", c.iteration, c.grid_x, c.grid_y, event);
        }
        out
    }
}

/// Rank drugs and proteins by mean affinity and map every logged event to
/// grid coordinates. Affinity logs only.
pub fn build_ranked_grid(dataset: &Dataset, log: &TrajectoryLog) -> Result<RankedGrid> {
    let affinity = dataset.as_affinity()?;
    let drug_order = ascending_order_by_mean(&affinity.drug_means());
    let protein_order = ascending_order_by_mean(&affinity.protein_means());
    let drug_pos = inverse_permutation(&drug_order);
    let protein_pos = inverse_permutation(&protein_order);

    let mut cells = Vec::new();
    let mut push = |iteration: u32, id: SampleId, event: GridEvent| -> Result<()> {
        let (d, p) = affinity.pair(id.0)?;
        cells.push(GridCell {
            iteration,
            grid_x: drug_pos[d],
            grid_y: protein_pos[p],
            event,
        });
        Ok(())
    };
    for r in &log.records {
        for &id in &r.added {
            push(r.iteration, id, GridEvent::Add)?;
        }
        for &id in &r.deleted {
            push(r.iteration, id, GridEvent::Delete)?;
        }
    }
    Ok(RankedGrid {
        drug_order,
        protein_order,
        cells,
    })
}

/// Directed graph of deletion origins: an edge `(m -> n, weight s)` says s
/// samples deleted at iteration m had been added at iteration n. Node
/// weights count how many deletion events originate at that iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeletionOriginGraph {
    /// `(deletion_iteration, addition_iteration) -> count`, every key with
    /// `addition_iteration < deletion_iteration`.
    pub edges: BTreeMap<(u32, u32), u64>,
    /// `addition_iteration -> eventually-deleted count`.
    pub node_weights: BTreeMap<u32, u64>,
}

impl DeletionOriginGraph {
    pub fn total_deletions(&self) -> u64 {
        self.edges.values().sum()
    }

    /// `deletion_iter,addition_iter,count` rows.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("deletion_iter,addition_iter,count\n");
        for (&(m, n), &w) in &self.edges {
            let _ = writeln!(out, "{m},{n},{w}");
        }
        out
    }

    /// `iteration,eventually_deleted` rows.
    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("iteration,eventually_deleted\n");
        for (&n, &w) in &self.node_weights {
            let _ = writeln!(out, "{n},{w}");
        }
        out
    }
}

/// Build the deletion-origin graph by replaying the event stream. A sample
/// deleted, re-added, and deleted again contributes one edge per deletion,
/// each pointing at its most recent addition.
pub fn build_deletion_origin_graph(log: &TrajectoryLog) -> Result<DeletionOriginGraph> {
    let mut added_at: BTreeMap<SampleId, u32> = BTreeMap::new();
    let mut edges: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut node_weights: BTreeMap<u32, u64> = BTreeMap::new();
    for r in &log.records {
        for &id in &r.added {
            if added_at.insert(id, r.iteration).is_some() {
                return Err(Error::MalformedEvents(format!(
                    "sample {id} added twice without a deletion in between"
                )));
            }
        }
        for &id in &r.deleted {
            let origin = added_at.remove(&id).ok_or_else(|| {
                Error::MalformedEvents(format!(
                    "sample {id} deleted at iteration {} without a prior addition",
                    r.iteration
                ))
            })?;
            if origin >= r.iteration {
                return Err(Error::MalformedEvents(format!(
                    "sample {id} deleted at iteration {} but added at {origin}",
                    r.iteration
                )));
            }
            *edges.entry((r.iteration, origin)).or_insert(0) += 1;
            *node_weights.entry(origin).or_insert(0) += 1;
        }
    }
    Ok(DeletionOriginGraph {
        edges,
        node_weights,
    })
}

/// One step of the distribution-shift series.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStep {
    pub from_fraction: f64,
    pub to_fraction: f64,
    pub kl: f64,
}

/// KL divergence of the labeled pool's label distribution between
/// consecutive checkpoints, each given as a fraction of the run length
/// (0.1 = the iteration 10% of the way through). The later checkpoint is
/// measured against the earlier one. Classification logs only.
pub fn distribution_shift_series(
    log: &TrajectoryLog,
    checkpoints: &[f64],
) -> Result<Vec<ShiftStep>> {
    if log.task != crate::datasets::TaskKind::Classification {
        return Err(Error::Unsupported(
            "distribution shift is defined over classification label histograms".into(),
        ));
    }
    if checkpoints.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least two checkpoint fractions".into(),
        ));
    }
    for &f in checkpoints {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!(
                "checkpoint fraction {f} must lie in [0, 1]"
            )));
        }
    }
    let last = log.last_iteration() as f64;
    let hist_at = |fraction: f64| -> Result<&Vec<u64>> {
        let iteration = (fraction * last).round() as u32;
        log.record(iteration)
            .map(|r| &r.label_histogram)
            .ok_or_else(|| Error::MalformedEvents(format!("no record at iteration {iteration}")))
    };
    let mut steps = Vec::with_capacity(checkpoints.len() - 1);
    for pair in checkpoints.windows(2) {
        let from = hist_at(pair[0])?;
        let to = hist_at(pair[1])?;
        steps.push(ShiftStep {
            from_fraction: pair[0],
            to_fraction: pair[1],
            kl: checkpoint_kl(to, from)?,
        });
    }
    Ok(steps)
}

/// `from_fraction,to_fraction,kl` rows.
pub fn shift_csv(steps: &[ShiftStep]) -> String {
    let mut out = String::from("from_fraction,to_fraction,kl\n");
    for s in steps {
        let _ = writeln!(out, "{},{},{}", s.from_fraction, s.to_fraction, s.kl);
    }
    out
}

/// Backbone feature vectors of every sample (committee member 0), for
/// external projection tools. Header `sample_id,f0,f1,...`.
pub fn features_csv(dataset: &Dataset, committee: &crate::learners::Committee) -> Result<String> {
    let backbone = &committee.members[0];
    let mut out = String::new();
    for id in 0..dataset.len() {
        let f = backbone.features(crate::learners::sample_ref(dataset, SampleId(id))?)?;
        if out.is_empty() {
            out.push_str("sample_id");
            for i in 0..f.len() {
                let _ = write!(out, ",f{i}");
            }
            out.push('\n');
        }
        let _ = write!(out, "{id}");
        for v in &f {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_bilinear_affinity, generate_blobs};
    use crate::engine::{run_experiment, ExperimentConfig, IterationRecord, RunOutcome};
    use crate::learners::TrainConfig;
    use crate::policies::PolicySpec;
    use crate::pool::PoolState;

    /// Hand-built log for unit cases.
    fn synthetic_log(records: Vec<IterationRecord>, task: crate::datasets::TaskKind) -> TrajectoryLog {
        TrajectoryLog {
            task,
            dataset_size: 100,
            m0: records.first().map(|r| r.added.len()).unwrap_or(0),
            n_add: 0,
            n_delete: 0,
            seed: 0,
            records,
            outcome: RunOutcome::MaxIterations,
            final_pool: PoolState::empty(100),
            final_committee: None,
        }
    }

    fn record(iteration: u32, added: &[usize], deleted: &[usize]) -> IterationRecord {
        IterationRecord {
            iteration,
            added: added.iter().map(|&i| SampleId(i)).collect(),
            deleted: deleted.iter().map(|&i| SampleId(i)).collect(),
            labeled_size: 0,
            acquired_total: 0,
            metric: None,
            label_histogram: vec![1, 1],
            wall_ms: 0,
        }
    }

    #[test]
    fn grid_orders_by_row_and_column_means() {
        // scores [[1,2],[3,4]]: drug means [1.5, 3.5], protein means [2, 3]
        let text = "drug_id\tprotein_id\tscore\nA\tX\t1\nA\tY\t2\nB\tX\t3\nB\tY\t4\n";
        let d = crate::datasets::read_affinity_table(std::io::BufReader::new(text.as_bytes()))
            .unwrap();
        let ds = Dataset::Affinity(d);
        let log = synthetic_log(
            vec![record(0, &[3], &[])],
            crate::datasets::TaskKind::Affinity,
        );
        let grid = build_ranked_grid(&ds, &log).unwrap();
        assert_eq!(grid.drug_order, vec![0, 1]);
        assert_eq!(grid.protein_order, vec![0, 1]);
        // sample 3 = (drug B, protein Y): the top-right cell
        assert_eq!(grid.cells[0].grid_x, 1);
        assert_eq!(grid.cells[0].grid_y, 1);
        assert_eq!(grid.cell_to_pair(1, 1).unwrap(), (1, 1));
    }

    #[test]
    fn grid_constant_matrix_falls_back_to_index_order() {
        let d = {
            let text = "drug_id\tprotein_id\tscore\nA\tX\t2\nA\tY\t2\nB\tX\t2\nB\tY\t2\n";
            crate::datasets::read_affinity_table(std::io::BufReader::new(text.as_bytes())).unwrap()
        };
        let log = synthetic_log(vec![], crate::datasets::TaskKind::Affinity);
        let grid = build_ranked_grid(&Dataset::Affinity(d), &log).unwrap();
        assert_eq!(grid.drug_order, vec![0, 1]);
        assert_eq!(grid.protein_order, vec![0, 1]);
    }

    #[test]
    fn grid_rejects_classification() {
        let blobs = Dataset::Classification(generate_blobs(2, 3, 2, 1.0, 0.1, 1).unwrap());
        let log = synthetic_log(vec![], crate::datasets::TaskKind::Classification);
        assert!(build_ranked_grid(&blobs, &log).is_err());
    }

    #[test]
    fn origin_graph_single_edge() {
        let log = synthetic_log(
            vec![
                record(0, &[1, 2], &[]),
                record(1, &[], &[]),
                record(2, &[7], &[]),
                record(3, &[], &[]),
                record(4, &[], &[]),
                record(5, &[], &[7]),
            ],
            crate::datasets::TaskKind::Classification,
        );
        let g = build_deletion_origin_graph(&log).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[&(5, 2)], 1);
        assert_eq!(g.node_weights[&2], 1);
        assert_eq!(g.total_deletions(), 1);
    }

    #[test]
    fn origin_graph_no_deletions_is_empty() {
        let log = synthetic_log(
            vec![record(0, &[1], &[]), record(1, &[2], &[])],
            crate::datasets::TaskKind::Classification,
        );
        let g = build_deletion_origin_graph(&log).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.total_deletions(), 0);
    }

    #[test]
    fn origin_graph_readdition_uses_latest_origin() {
        let log = synthetic_log(
            vec![
                record(0, &[1], &[]),
                record(1, &[], &[1]),
                record(2, &[1], &[]),
                record(3, &[], &[1]),
            ],
            crate::datasets::TaskKind::Classification,
        );
        let g = build_deletion_origin_graph(&log).unwrap();
        assert_eq!(g.edges[&(1, 0)], 1);
        assert_eq!(g.edges[&(3, 2)], 1);
        assert_eq!(g.total_deletions(), 2);
    }

    #[test]
    fn origin_graph_rejects_delete_before_add() {
        let log = synthetic_log(
            vec![record(0, &[], &[4])],
            crate::datasets::TaskKind::Classification,
        );
        assert!(matches!(
            build_deletion_origin_graph(&log),
            Err(Error::MalformedEvents(_))
        ));
    }

    #[test]
    fn origin_weights_match_engine_deletions() {
        let data = Dataset::Affinity(generate_bilinear_affinity(12, 10, 2, 0.05, 9).unwrap());
        let cfg = ExperimentConfig {
            m0: 8,
            n_add: 8,
            n_delete: 2,
            max_iterations: 10,
            coverage_target: None,
            label_budget: None,
            addition_policy: PolicySpec::parse("hybrid(greedy:4,variance:4)").unwrap(),
            deletion_policy: PolicySpec::parse("variance").unwrap(),
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 16,
                max_epochs: 5,
                patience: 5,
                ..TrainConfig::default()
            },
            committee_size: 2,
            seed: 3,
            metric_every: 1,
            warmup: 0,
            allow_shrinking: false,
            coverage_k: 10,
            embed_dim: 4,
            threads: 1,
        };
        let log = run_experiment(&data, &cfg).unwrap();
        let g = build_deletion_origin_graph(&log).unwrap();
        let delete_events: u64 = log.records.iter().map(|r| r.deleted.len() as u64).sum();
        assert_eq!(g.total_deletions(), delete_events);
        assert!(delete_events > 0);
        for &(m, n) in g.edges.keys() {
            assert!(n < m);
        }
    }

    #[test]
    fn shift_series_zero_between_identical_checkpoints() {
        let mut r0 = record(0, &[1], &[]);
        r0.label_histogram = vec![3, 4, 5];
        let mut r1 = record(1, &[2], &[]);
        r1.label_histogram = vec![6, 7, 8];
        let log = synthetic_log(vec![r0, r1], crate::datasets::TaskKind::Classification);

        let steps = distribution_shift_series(&log, &[0.0, 0.0]).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(steps[0].kl.abs() < 1e-12);

        let steps = distribution_shift_series(&log, &[0.0, 1.0]).unwrap();
        assert!(steps[0].kl >= 0.0);
    }

    #[test]
    fn shift_series_rejects_affinity_logs() {
        let log = synthetic_log(vec![record(0, &[1], &[])], crate::datasets::TaskKind::Affinity);
        assert!(matches!(
            distribution_shift_series(&log, &[0.0, 1.0]),
            Err(Error::Unsupported(_))
        ));
    }
}
