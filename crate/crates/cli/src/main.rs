//! `aal` — run and analyze adaptive active learning experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aal_cli::commands::{cmd_analyze, cmd_run, exit_code_for, AnalysisKind};
use aal_cli::config::Overrides;

#[derive(Parser)]
#[command(name = "aal", version, about = "Adaptive active learning experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (or a replication set) and write its logs.
    Run(RunArgs),
    /// Export post-hoc analyses from a completed run directory.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (sectioned key = value); applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named protocol preset: kiba_paper or cifar_paper_surrogate.
    #[arg(long)]
    preset: Option<String>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications (seeds seed, seed+1, ...).
    #[arg(long)]
    replications: Option<usize>,
    /// Addition policy override, e.g. "hybrid(greedy:32,variance:32)".
    #[arg(long = "add-policy")]
    add_policy: Option<String>,
    /// Deletion policy override, e.g. "rank_ensemble(entropy:1,diversity:1)".
    #[arg(long = "del-policy")]
    del_policy: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "aal-out")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// A run directory containing manifest.json and events.csv.
    run_dir: PathBuf,
    /// Which analysis to export: grid, origin, shift, or features.
    which: AnalysisKind,
    /// Checkpoint fractions for the shift analysis.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 1.0])]
    checkpoints: Vec<f64>,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => {
            let overrides = Overrides {
                seed: args.seed,
                replications: args.replications,
                add_policy: args.add_policy.clone(),
                del_policy: args.del_policy.clone(),
            };
            cmd_run(
                args.preset.as_deref(),
                args.config.as_deref(),
                &overrides,
                &args.out,
            )
        }
        Command::Analyze(args) => cmd_analyze(
            &args.run_dir,
            args.which,
            &args.checkpoints,
            args.out.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
