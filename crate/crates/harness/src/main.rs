use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ipf_harness::config::{BuiltModel, ExperimentConfig};
use ipf_harness::crossover::{crossover_report, exact_table, CrossoverSettings};
use ipf_harness::experiment::{read_raw, run_experiment, write_outputs};
use ipf_harness::stats::summarize;

#[derive(Parser)]
#[command(name = "ipf", about = "Island particle filter experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured cell and write raw, summary and table CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print exact asymptotic constants of a finite model as CSV.
    Exact {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the MSE crossover report of a finite model as CSV.
    Crossover {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize a raw CSV (no oracle) to stdout.
    Summarize { raw: PathBuf },
}

fn finite_model(cfg: &ExperimentConfig) -> anyhow::Result<islandpf::FiniteModel> {
    match cfg.model.build()? {
        BuiltModel::Finite(m) => Ok(m),
        _ => bail!("this command needs a finite model"),
    }
}

fn print_csv<T: serde::Serialize>(rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, workers } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            let dir = out.or_else(|| cfg.output.clone()).context("no output directory given")?;
            let exp = run_experiment(&cfg)?;
            write_outputs(&exp, &dir)?;
            eprintln!(
                "{} rows, {} failures, written to {}",
                exp.raw.len(),
                exp.failures.len(),
                dir.display()
            );
        }
        Command::Exact { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            print_csv(&exact_table(&finite_model(&cfg)?, &cfg.functions)?)?;
        }
        Command::Crossover { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let spec = cfg.crossover.clone().context("config has no `crossover` section")?;
            let model = finite_model(&cfg)?;
            let settings = CrossoverSettings {
                n2: spec.n2,
                factors: spec.factors,
                replications: spec.replications,
                seed: cfg.seed,
            };
            let mut rows = Vec::new();
            for f in &cfg.functions {
                rows.extend(crossover_report(&model, f, &settings)?);
            }
            print_csv(&rows)?;
        }
        Command::Summarize { raw } => {
            print_csv(&summarize(&read_raw(&raw)?, None))?;
        }
    }
    Ok(())
}
