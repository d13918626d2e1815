//! The `run` and `analyze` commands, factored so integration tests can call
//! them directly. Exit-code mapping lives in `main`.

use std::path::{Path, PathBuf};

use aal_core::analysis;
use aal_core::datasets::Dataset;
use aal_core::engine::{self, RunOutcome, TrajectoryLog};
use aal_core::learners::Committee;
use aal_core::{Error, Result};

use crate::config::{resolve, Overrides};
use crate::manifest::RunManifest;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const COMMITTEE_FILE: &str = "committee.json";
pub const OUTCOME_FILE: &str = "outcome.json";
pub const POOL_FILE: &str = "pool.txt";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Worker-thread cap from the environment; defaults to 1 (serial).
pub fn threads_from_env() -> usize {
    std::env::var("AAL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn write_run_outputs(dir: &Path, log: &TrajectoryLog) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(ITERATIONS_FILE), log.iterations_csv())?;
    std::fs::write(dir.join(EVENTS_FILE), log.events_csv())?;
    std::fs::write(dir.join(POOL_FILE), log.final_pool.snapshot())?;
    std::fs::write(
        dir.join(OUTCOME_FILE),
        serde_json::to_string_pretty(&log.outcome)?,
    )?;
    if let Some(committee) = &log.final_committee {
        std::fs::write(dir.join(COMMITTEE_FILE), serde_json::to_string(committee)?)?;
    }
    Ok(())
}

/// Execute a run (or replication set) and write the output tree.
pub fn cmd_run(
    preset: Option<&str>,
    config_path: Option<&Path>,
    overrides: &Overrides,
    out_dir: &Path,
) -> Result<()> {
    let config = resolve(preset, config_path, overrides)?;
    let dataset = config.dataset.build()?;
    let threads = threads_from_env();
    // Surface config problems before any output is written; whatever the
    // underlying kind, a validation failure is a configuration error.
    config
        .to_experiment(threads)
        .validate(&dataset)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    std::fs::create_dir_all(out_dir)?;
    let seeds: Vec<u64> = (0..config.replications)
        .map(|i| config.seed.wrapping_add(i as u64))
        .collect();
    RunManifest::for_config(&config, seeds.clone(), out_dir).write(&out_dir.join(MANIFEST_FILE))?;
    std::fs::write(out_dir.join(CONFIG_FILE), config.to_toml())?;

    if config.replications == 1 {
        let log = engine::run_experiment(&dataset, &config.to_experiment(threads))?;
        write_run_outputs(out_dir, &log)?;
        report_outcome(&log);
        return Ok(());
    }

    let mut logs = Vec::with_capacity(config.replications);
    for (i, &seed) in seeds.iter().enumerate() {
        let mut run_config = config.clone();
        run_config.seed = seed;
        run_config.replications = 1;
        let run_dir = out_dir.join(format!("run_{i:02}"));
        std::fs::create_dir_all(&run_dir)?;
        RunManifest::for_config(&run_config, vec![seed], &run_dir)
            .write(&run_dir.join(MANIFEST_FILE))?;
        std::fs::write(run_dir.join(CONFIG_FILE), run_config.to_toml())?;
        let log = engine::run_experiment(&dataset, &run_config.to_experiment(threads))?;
        write_run_outputs(&run_dir, &log)?;
        report_outcome(&log);
        logs.push(log);
    }
    let summary = engine::summarize(&logs);
    std::fs::write(out_dir.join(SUMMARY_FILE), summary.to_csv())?;
    Ok(())
}

fn report_outcome(log: &TrajectoryLog) {
    let outcome = match &log.outcome {
        RunOutcome::TargetReached { iteration } => format!("target reached at iteration {iteration}"),
        RunOutcome::BudgetReached { iteration } => format!("label budget reached at iteration {iteration}"),
        RunOutcome::PoolExhausted { iteration } => format!("pool exhausted at iteration {iteration}"),
        RunOutcome::MaxIterations => "iteration cap reached".to_string(),
        RunOutcome::NotRun => "no iterations requested".to_string(),
        RunOutcome::Diverged { iteration, message } => {
            format!("DIVERGED at iteration {iteration}: {message}")
        }
    };
    let metric = log
        .records
        .iter()
        .rev()
        .find_map(|r| r.metric)
        .map(|m| format!("{m:.4}"))
        .unwrap_or_else(|| "-".to_string());
    eprintln!(
        "seed {}: {} iterations, |L| = {}, metric {}, {}",
        log.seed,
        log.last_iteration(),
        log.final_pool.labeled_len(),
        metric,
        outcome
    );
}

/// Which analysis to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Grid,
    Origin,
    Shift,
    Features,
}

impl std::str::FromStr for AnalysisKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "grid" => Ok(Self::Grid),
            "origin" => Ok(Self::Origin),
            "shift" => Ok(Self::Shift),
            "features" => Ok(Self::Features),
            other => Err(format!(
                "unknown analysis {other:?} (grid, origin, shift, features)"
            )),
        }
    }
}

fn require_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::InvalidInput(format!(
            "run directory {} is missing {name}",
            dir.display()
        )));
    }
    Ok(path)
}

fn load_run(run_dir: &Path) -> Result<(Dataset, TrajectoryLog)> {
    let manifest = RunManifest::load(&require_file(run_dir, MANIFEST_FILE)?)?;
    let dataset = manifest.dataset.build()?;
    let events = std::fs::read_to_string(require_file(run_dir, EVENTS_FILE)?)?;
    let log = TrajectoryLog::from_events_csv(&events, &dataset)?;
    Ok((dataset, log))
}

/// Export one analysis of a completed run into `out_dir` (defaults to the
/// run directory).
pub fn cmd_analyze(
    run_dir: &Path,
    which: AnalysisKind,
    checkpoints: &[f64],
    out_dir: Option<&Path>,
) -> Result<()> {
    let out = out_dir.unwrap_or(run_dir);
    std::fs::create_dir_all(out)?;
    match which {
        AnalysisKind::Grid => {
            let (dataset, log) = load_run(run_dir)?;
            let grid = analysis::build_ranked_grid(&dataset, &log)?;
            std::fs::write(out.join("grid.csv"), grid.to_csv())?;
        }
        AnalysisKind::Origin => {
            let (_, log) = load_run(run_dir)?;
            let graph = analysis::build_deletion_origin_graph(&log)?;
            std::fs::write(out.join("origin_edges.csv"), graph.edges_csv())?;
            std::fs::write(out.join("origin_nodes.csv"), graph.nodes_csv())?;
        }
        AnalysisKind::Shift => {
            let (_, log) = load_run(run_dir)?;
            let steps = analysis::distribution_shift_series(&log, checkpoints)?;
            std::fs::write(out.join("shift.csv"), analysis::shift_csv(&steps))?;
        }
        AnalysisKind::Features => {
            let manifest = RunManifest::load(&require_file(run_dir, MANIFEST_FILE)?)?;
            let dataset = manifest.dataset.build()?;
            let text = std::fs::read_to_string(require_file(run_dir, COMMITTEE_FILE)?)?;
            let committee: Committee = serde_json::from_str(&text)?;
            std::fs::write(out.join("features.csv"), analysis::features_csv(&dataset, &committee)?)?;
        }
    }
    Ok(())
}

/// Exit-code classification: configuration problems are 2, everything else
/// that fails is 1.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Parse { .. } | Error::PolicySpec { .. } => 2,
        _ => 1,
    }
}
