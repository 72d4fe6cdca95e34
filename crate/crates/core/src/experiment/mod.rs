//! Training, evaluation, NoUM, seed replication and alphabet × word-length
//! sweeps, plus their on-disk reports.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{AgentConfig, EvalConfig, ExperimentConfig, Game, SweepConfig, TrainerConfig, WorldConfig};
pub use report::{LongRow, MetricsReport, RunManifest, SeedFailure, SeedReport, Stat};
pub use run::{evaluate, init_agents, noum, train, untrained_accuracy, EpochLog, GameData, TestReport, TrainOutcome};
pub use sweep::{run_sweep, SweepCell, SweepGrid};

use std::path::Path;
use std::time::Instant;

use crate::agents::{save_checkpoint, Agents};
use crate::error::{Error, Result};

/// One trained seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub report: SeedReport,
    pub agents: Agents,
}

/// Trains and evaluates a single seed of a resolved config.
pub fn run_seed(cfg: &ExperimentConfig, data: &GameData, seed: u64, on_epoch: &dyn Fn(&EpochLog)) -> Result<SeedRun> {
    let out = train(cfg, data, seed, on_epoch)?;
    let counts = cfg.eval.candidate_counts.clone().unwrap_or_else(|| vec![data.pool_size()]);
    let test = evaluate(&out.agents, data, &counts, seed)?;
    Ok(SeedRun {
        report: SeedReport {
            seed,
            best_epoch: out.best_epoch,
            epochs_run: out.epochs_run,
            validation_accuracy: out.validation_accuracy,
            train_loss: out.train_loss,
            test,
        },
        agents: out.agents,
    })
}

/// Runs every configured seed and aggregates. A failing seed is recorded and
/// marks the report partial; configuration errors abort immediately.
pub fn replicate(cfg: &ExperimentConfig, on_epoch: &dyn Fn(&EpochLog)) -> Result<(MetricsReport, Vec<SeedRun>)> {
    let cfg = cfg.resolve()?;
    let data = GameData::new(&cfg)?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    for seed in seeds {
        match run_seed(&cfg, &data, seed, on_epoch) {
            Ok(r) => runs.push(r),
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => failures.push(SeedFailure {
                seed,
                numerical: matches!(e, Error::NonFinite(_)),
                error: e.to_string(),
            }),
        }
    }
    let reports = runs.iter().map(|r| r.report.clone()).collect();
    Ok((MetricsReport::build(cfg, reports, failures), runs))
}

/// Writes `report.json`, `results.csv`, `manifest.json`, the split lists and
/// one checkpoint per seed under `dir`.
pub fn write_run(dir: &Path, report: &MetricsReport, runs: &[SeedRun], wall_time: f64) -> Result<()> {
    report.write(&dir.join("report.json"))?;
    report::write_csv(&dir.join("results.csv"), &report.long_rows())?;
    let manifest = RunManifest::new(&report.config, wall_time);
    report::write_text(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    GameData::new(&report.config)?.split.write_dir(&dir.join("splits"))?;
    for r in runs {
        save_checkpoint(&r.agents.params, &dir.join("checkpoints").join(format!("seed-{}.bin", r.report.seed)))?;
    }
    Ok(())
}

/// `replicate` followed by `write_run`. Returns the report, which is also
/// on disk; a run where every seed failed is an error.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, on_epoch: &dyn Fn(&EpochLog)) -> Result<MetricsReport> {
    let start = Instant::now();
    let (report, runs) = replicate(cfg, on_epoch)?;
    write_run(dir, &report, &runs, start.elapsed().as_secs_f64())?;
    if report.runs.is_empty() {
        let first = &report.failures[0];
        return Err(if first.numerical {
            Error::NonFinite(first.error.clone())
        } else {
            Error::Contract(format!("every seed failed; first: {}", first.error))
        });
    }
    Ok(report)
}
