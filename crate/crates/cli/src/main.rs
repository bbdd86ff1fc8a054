//! `nettmle` — sweep runner for the quarantine-effect estimators.

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use nettmle_cli::config::parse_config;
use nettmle_cli::runner::{run_experiment, run_truth_only, RunOptions};
use nettmle_cli::series::{emit_series_named, SeriesFilter};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "nettmle",
    version,
    about = "Quarantine-effect sweeps: simulate epidemics on contact networks, \
             estimate counterfactual infection rates, and summarize the repeats"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the sweep described by a config file.
    Run {
        /// Experiment config (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
        /// Continue an existing output dir, skipping completed run ids.
        #[arg(long)]
        resume: bool,
    },
    /// Extract per-facet `p_omega,value` series from a summary CSV.
    Series {
        /// Summary CSV produced by `run`.
        #[arg(long)]
        summary: PathBuf,
        /// One of bias|ese|cover_direct|cover_latent.
        #[arg(long)]
        metric: String,
        /// Keep only this graph kind.
        #[arg(long)]
        graph: Option<String>,
        /// Keep only this population size.
        #[arg(long)]
        n: Option<usize>,
        /// Keep only this scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Keep only this budget.
        #[arg(long)]
        budget: Option<f64>,
        /// Keep only this priority.
        #[arg(long)]
        priority: Option<String>,
        /// Keep only this model.
        #[arg(long)]
        model: Option<String>,
        /// Where to write the series files (default: next to the summary).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compute only the ground-truth table for a config.
    Truth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, jobs, resume } => {
            let spec = parse_config(&config)?;
            let report = run_experiment(&spec, &RunOptions { jobs, resume })?;
            println!(
                "{} runs ({} failed) -> {}",
                report.total_runs,
                report.failed_runs,
                report.runs_csv.display()
            );
            println!("truth   -> {}", report.truth_csv.display());
            println!(
                "summary -> {} ({} rows)",
                report.summary_csv.display(),
                report.summary_rows
            );
            if report.too_many_failures() {
                bail!(
                    "{} of {} runs failed (more than 10%)",
                    report.failed_runs,
                    report.total_runs
                );
            }
            Ok(())
        }
        Command::Series {
            summary,
            metric,
            graph,
            n,
            scenario,
            budget,
            priority,
            model,
            out_dir,
        } => {
            let filter = SeriesFilter { graph, n, scenario, budget, priority, model };
            let paths = emit_series_named(&summary, &metric, &filter, out_dir.as_deref())?;
            for path in paths {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Truth { config, jobs } => {
            let spec = parse_config(&config)?;
            let path = run_truth_only(&spec, jobs)?;
            println!("truth -> {}", path.display());
            Ok(())
        }
    }
}
