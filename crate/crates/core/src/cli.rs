//! Command-line front end: `train`, `eval`, `sweep` and `report`.
//!
//! Precedence is flags, then the config file, then built-in defaults. A
//! relative output directory is placed under `$QCOMM_OUTPUT_ROOT` when that
//! variable is set.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agents::load_checkpoint;
use crate::error::{Error, Result};
use crate::experiment::report::{comparison_csv, find_reports, write_csv, write_text};
use crate::experiment::{self, init_agents, run_experiment, run_sweep, ExperimentConfig, GameData, MetricsReport, SweepConfig};

pub const OUTPUT_ROOT_ENV: &str = "QCOMM_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "qcomm", version, about = "Referential and classification games over quantized, Gumbel-softmax and continuous channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every seed of a config, then evaluate and write reports.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train an alphabet × word-length grid.
    Sweep(SweepArgs),
    /// Merge every report under a directory into comparison.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replaces the config's seed list.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the 10^4-object world regardless of the config.
    #[arg(long)]
    pub full_scale: bool,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Maximum number of cells trained at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Candidate counts to evaluate, e.g. `2,10,100`.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<usize>,
    /// Seed of the evaluation episodes. Defaults to the seed in the
    /// checkpoint file name (`seed-N.bin`), then the config's first seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `report.json` files.
    pub dir: PathBuf,
    /// Where to write comparison.csv (defaults to DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn load_config(path: &Path, seeds: &[u64], full_scale: bool) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    if full_scale {
        cfg.full_scale();
    }
    Ok(cfg)
}

/// Output directory after applying `--out`, the config and the environment.
pub fn output_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    let rel = cfg.output_dir.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(cfg.name.clone().unwrap_or_else(|| cfg.run_label()))
    });
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if rel.is_relative() => PathBuf::from(root).join(rel),
        _ => rel,
    }
}

fn progress(quiet: bool) -> impl Fn(&experiment::EpochLog) + Sync {
    move |log: &experiment::EpochLog| {
        if !quiet {
            eprintln!(
                "seed {} epoch {:>3}  loss {:.4}  val acc {:.4}",
                log.seed, log.epoch, log.train_loss, log.validation_accuracy
            );
        }
    }
}

fn print_summary(report: &MetricsReport) {
    println!("{}", report.label);
    println!("{:>8}  {:>8}  {:>8}", "n", "mean", "std");
    for a in &report.aggregate {
        match a.accuracy {
            Some(s) => println!("{:>8}  {:>8.4}  {:>8.4}", a.n, s.mean, s.std),
            None => println!("{:>8}  {:>8}  {:>8}", a.n, "failed", ""),
        }
    }
    match report.noum {
        Some(s) => println!("NoUM {:.1} ± {:.1}", s.mean, s.std),
        None => println!("NoUM n/a"),
    }
    for f in &report.failures {
        println!("seed {} failed: {}", f.seed, f.error);
    }
}

fn cmd_train(a: &RunArgs) -> Result<()> {
    let cfg = load_config(&a.config, &a.seed, a.full_scale)?;
    let dir = output_dir(&cfg, a.out.as_deref());
    let report = run_experiment(&cfg, &dir, &progress(a.quiet))?;
    print_summary(&report);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(&a.run.config, &a.run.seed, a.run.full_scale)?;
    if cfg.sweep.is_none() {
        cfg.sweep = Some(SweepConfig::default());
    }
    let dir = output_dir(&cfg, a.run.out.as_deref());
    let grid = run_sweep(&cfg, a.jobs, &progress(a.run.quiet))?;
    grid.write(&dir)?;
    for cell in &grid.cells {
        match (&cell.error, cell.headline_accuracy()) {
            (Some(e), _) => println!("v={:<3} w={:<4} {}  FAILED: {e}", cell.alphabet, cell.word_length, cell.regime),
            (None, acc) => println!(
                "v={:<3} w={:<4} {}  acc {}  NoUM {}",
                cell.alphabet,
                cell.word_length,
                cell.regime,
                acc.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()),
                cell.noum().map(|x| format!("{x:.1}")).unwrap_or_else(|| "n/a".into())
            ),
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

/// Row of `eval-seed-N.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub noum: Option<usize>,
    pub error: Option<String>,
}

fn seed_from_name(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.strip_prefix("seed-")?.parse().ok()
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = load_config(&a.config, &[], a.full_scale)?.resolve()?;
    let seed = a
        .seed
        .or_else(|| seed_from_name(&a.checkpoint))
        .unwrap_or(cfg.seeds[0]);
    let loaded = load_checkpoint(&a.checkpoint)?;
    let mut agents = init_agents(&cfg, seed)?;
    agents.params.load_from(&loaded)?;
    let data = GameData::new(&cfg)?;
    let counts = if a.candidates.is_empty() {
        cfg.eval.candidate_counts.clone().unwrap_or_default()
    } else {
        a.candidates.clone()
    };
    let report = experiment::evaluate(&agents, &data, &counts, seed)?;
    let noum = report.noum.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into());
    println!("{:>8}  {:>9}  {:>6}", "n", "accuracy", "NoUM");
    let mut rows = Vec::new();
    for r in &report.results {
        let acc = r.accuracy.map(|x| format!("{x:.4}")).unwrap_or_else(|| "error".into());
        println!("{:>8}  {:>9}  {:>6}", r.n, acc, noum);
        if let Some(e) = &r.error {
            eprintln!("n={}: {e}", r.n);
        }
        rows.push(EvalRow {
            n: r.n,
            accuracy: r.accuracy,
            noum: report.noum,
            error: r.error.clone(),
        });
    }
    let dir = output_dir(&cfg, a.out.as_deref());
    let path = dir.join(format!("eval-seed-{seed}.csv"));
    write_csv(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    if !a.dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", a.dir.display())));
    }
    let paths = find_reports(&a.dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!("no report.json found under {}", a.dir.display())));
    }
    let reports = paths
        .iter()
        .map(|p| MetricsReport::read(p))
        .collect::<Result<Vec<_>>>()?;
    let csv = comparison_csv(&reports)?;
    let out = a.out.clone().unwrap_or_else(|| a.dir.clone()).join("comparison.csv");
    write_text(&out, &csv)?;
    print!("{csv}");
    println!("wrote {}", out.display());
    Ok(())
}
