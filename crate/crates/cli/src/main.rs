//! `freshreplay` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod bench;
mod error;
mod reports;
mod run;
mod settings;
mod sweep;

use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "freshreplay", version, about = "Freshness-aware prioritized replay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that build a run configuration.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// `key = value` config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set priority.tau=1000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`, applied last.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one configuration and write metrics.jsonl and summary.csv.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every (value, seed) cell of a one-axis sweep.
    Sweep {
        /// Sweep file: run keys plus `sweep.axis`, `sweep.values`, `sweep.seeds`.
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Scripted workload comparing sampled ages with and without age decay.
    StalenessDemo {
        #[arg(long, default_value_t = 500.0)]
        tau: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        reference_tau: f64,
        /// Minimum relative age reduction for success.
        #[arg(long, default_value_t = 0.25)]
        required_gap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the per-step CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Divergences and ESS of a drifting softmax policy against its start.
    EssReport {
        #[arg(long, default_value_t = 4)]
        actions: usize,
        /// Logit increase of the first action per step.
        #[arg(long, default_value_t = 0.05)]
        gap: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Nominal sample count for the ESS columns.
        #[arg(long, default_value_t = 128.0)]
        n: f64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time a full priority refresh of an N-entry buffer.
    BenchRefresh {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 100.0)]
        budget_ms: f64,
        /// Also fit wall time against N over 10^4, 3*10^4 and 10^5 entries.
        #[arg(long)]
        scaling: bool,
    },
}

/// Refresh worker threads: `FRESHREPLAY_THREADS` if set, otherwise the
/// machine's parallelism.
pub fn refresh_threads() -> usize {
    std::env::var("FRESHREPLAY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { cfg, out } => {
            let config = settings::load(cfg.config.as_deref(), &cfg.overrides, cfg.seed)?;
            let metrics = run::run_to_dir(&config, &out, refresh_threads())?;
            let last = metrics.last().expect("at least one iteration");
            println!(
                "{} iterations, final mean return {:.4}, output in {}",
                metrics.len(),
                last.mean_return,
                out.display()
            );
            Ok(())
        }
        Command::Sweep { spec, overrides, out } => sweep::run(&spec, &overrides, &out),
        Command::StalenessDemo {
            tau,
            reference_tau,
            required_gap,
            seed,
            out,
        } => reports::staleness(tau, reference_tau, required_gap, seed, out.as_deref()),
        Command::EssReport {
            actions,
            gap,
            steps,
            n,
            out,
        } => reports::ess(actions, gap, steps, n, out.as_deref()),
        Command::BenchRefresh {
            n,
            runs,
            budget_ms,
            scaling,
        } => bench::run(n, runs, budget_ms, scaling, refresh_threads()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
