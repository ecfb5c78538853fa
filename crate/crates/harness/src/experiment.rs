//! Replicated runs over `(cell, scheme pair)` combinations.

use std::path::Path;
use std::time::Instant;

use islandpf::island::{run, run_occupancy};
use islandpf::rng::{derive_seed, domain};
use islandpf::{RunConfig, RunResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BuiltModel, Engine, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::oracle::{oracle, Oracle};
use crate::stats::{summarize, SummaryRow};
use crate::tables::{gain_tables, interaction_table};

/// One raw CSV row: a replication's estimate of one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub config_hash: String,
    pub cell: usize,
    pub within: String,
    pub across: String,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub rep: usize,
    pub function: String,
    /// Empty when the replication failed.
    pub estimate: Option<f64>,
    pub log_gamma1: Option<f64>,
    pub interactions: Option<u64>,
    pub island_resamples: Option<u64>,
    pub particle_resamples: Option<u64>,
    pub seed: u64,
    /// Wall-clock milliseconds; 0 unless timing is recorded.
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub cell: usize,
    pub within: String,
    pub across: String,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config_hash: String,
    pub horizon: usize,
    pub oracle: Oracle,
    pub raw: Vec<RawRow>,
    pub failures: Vec<Failure>,
    pub summary: Vec<SummaryRow>,
}

struct Task {
    cell: usize,
    rep: usize,
    run: RunConfig,
}

/// Seed of replication `rep` of scheme pair `scheme` in cell `cell`.
pub fn replication_seed(master: u64, cell: usize, scheme: usize, rep: usize) -> u64 {
    derive_seed(master, &[domain::REPLICATION, cell as u64, scheme as u64, rep as u64])
}

pub fn run_once(model: &BuiltModel, cfg: &RunConfig, engine: Engine) -> islandpf::Result<RunResult> {
    match model {
        BuiltModel::Lgm(m) => run(m, cfg),
        BuiltModel::Sv(m) => run(m, cfg),
        BuiltModel::Finite(m) => {
            let occupancy = match engine {
                Engine::Auto => cfg.within.has_unit_weights(),
                Engine::Occupancy => true,
                Engine::Particles => false,
            };
            if occupancy {
                run_occupancy(m, cfg)
            } else {
                run(m, cfg)
            }
        }
    }
}

fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for (cell, &(n1, n2)) in cfg.cell_list().iter().enumerate() {
        for (scheme, pair) in cfg.schemes.iter().enumerate() {
            for rep in 0..cfg.replications_for(n1, n2) {
                let run = RunConfig::new(
                    n1,
                    n2,
                    cfg.within_scheme(pair),
                    cfg.across_scheme(pair),
                    replication_seed(cfg.seed, cell, scheme, rep),
                )
                .with_functions(cfg.functions.clone());
                out.push(Task { cell, rep, run });
            }
        }
    }
    out
}

/// Run every replication, in parallel over `cfg.workers` threads. Rows come
/// back in `(cell, scheme, rep, function)` order whatever the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let oracle = oracle(&model, &cfg.functions, cfg.sv_reference)?;
    let hash = cfg.config_hash();
    let tasks = tasks(cfg);
    let execute = |t: &Task| {
        let start = cfg.record_timing.then(Instant::now);
        let result = run_once(&model, &t.run, cfg.engine);
        let millis = start.map_or(0, |s| s.elapsed().as_millis() as u64);
        (result, millis)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| HarnessError::InvalidConfig(format!("worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| tasks.par_iter().map(execute).collect());

    let mut raw = Vec::with_capacity(results.len() * cfg.functions.len());
    let mut failures = Vec::new();
    for (t, (result, millis)) in tasks.iter().zip(results) {
        let within = t.run.within.label();
        let across = t.run.across.label();
        let row = |function: String, estimate, r: Option<&RunResult>| RawRow {
            config_hash: hash.clone(),
            cell: t.cell,
            within: within.clone(),
            across: across.clone(),
            n1: t.run.n1,
            n2: t.run.n2,
            rep: t.rep,
            function,
            estimate,
            log_gamma1: r.map(|r| r.log_gamma),
            interactions: r.map(|r| r.interaction_count),
            island_resamples: r.map(|r| r.island_resample_events),
            particle_resamples: r.map(|r| r.particle_resample_events),
            seed: t.run.seed,
            millis,
        };
        match result {
            Ok(r) => {
                for (name, value) in &r.estimates {
                    raw.push(row(name.clone(), Some(*value), Some(&r)));
                }
            }
            Err(e) => {
                failures.push(Failure {
                    cell: t.cell,
                    within: within.clone(),
                    across: across.clone(),
                    rep: t.rep,
                    message: e.to_string(),
                });
                for f in &cfg.functions {
                    raw.push(row(f.name(), None, None));
                }
            }
        }
    }
    let summary = summarize(&raw, Some(&oracle));
    Ok(Experiment { config_hash: hash, horizon: model.horizon(), oracle, raw, failures, summary })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<Vec<RawRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Write `raw.csv`, `summary.csv`, `failures.csv`, `interactions.csv` and
/// `variance_gain.csv` into `dir`.
pub fn write_outputs(exp: &Experiment, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("raw.csv"), &exp.raw)?;
    write_csv(&dir.join("summary.csv"), &exp.summary)?;
    write_failures(&dir.join("failures.csv"), &exp.failures)?;
    write_csv(&dir.join("interactions.csv"), &interaction_table(&exp.summary, exp.horizon))?;
    write_csv(&dir.join("variance_gain.csv"), &gain_tables(&exp.summary)?)?;
    Ok(())
}

fn write_failures(path: &Path, failures: &[Failure]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if failures.is_empty() {
        w.write_record(["cell", "within", "across", "rep", "message"])?;
    }
    for f in failures {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(())
}
