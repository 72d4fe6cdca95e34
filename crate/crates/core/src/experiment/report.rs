use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{Architecture, Mode, QuantizeRegime};
use crate::error::{Error, Result};

use super::config::{ExperimentConfig, Game};
use super::run::{CountResult, TestReport};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    /// Values are summed in sorted order so the result does not depend on
    /// the order they were produced in.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub validation_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub test: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    /// The seed hit a NaN or infinity rather than a logic error.
    pub numerical: bool,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub accuracy: Option<Stat>,
}

/// Everything a run produces apart from checkpoints and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub config: ExperimentConfig,
    pub runs: Vec<SeedReport>,
    pub failures: Vec<SeedFailure>,
    pub aggregate: Vec<AggregateRow>,
    pub noum: Option<Stat>,
    /// Set when any seed failed.
    pub partial: bool,
}

impl MetricsReport {
    pub fn build(config: ExperimentConfig, mut runs: Vec<SeedReport>, mut failures: Vec<SeedFailure>) -> Self {
        runs.sort_by_key(|r| r.seed);
        failures.sort_by_key(|f| f.seed);
        let counts = config.eval.candidate_counts.clone().unwrap_or_default();
        let aggregate = counts
            .iter()
            .map(|&n| {
                let values: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.test.results.iter().find(|c| c.n == n).and_then(|c| c.accuracy))
                    .collect();
                AggregateRow {
                    n,
                    accuracy: Stat::of(&values),
                }
            })
            .collect();
        let noums: Vec<f64> = runs.iter().filter_map(|r| r.test.noum.map(|v| v as f64)).collect();
        MetricsReport {
            label: config.run_label(),
            partial: !failures.is_empty(),
            config,
            runs,
            failures,
            aggregate,
            noum: Stat::of(&noums),
        }
    }

    pub fn mean_accuracy(&self, n: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|a| a.n == n)
            .and_then(|a| a.accuracy)
            .map(|s| s.mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One long-format row per seed and candidate count.
    pub fn long_rows(&self) -> Vec<LongRow> {
        let ch = &self.config.channel;
        let mut rows = Vec::new();
        for r in &self.runs {
            for CountResult { n, accuracy, .. } in &r.test.results {
                rows.push(LongRow {
                    game: self.config.game,
                    mode: ch.mode,
                    architecture: ch.architecture,
                    alphabet: ch.alphabet_size,
                    word_length: ch.word_length,
                    message_length: ch.message_length,
                    regime: (ch.mode == Mode::Quantized).then_some(ch.quantize_regime),
                    seed: r.seed,
                    n: *n,
                    accuracy: *accuracy,
                    noum: r.test.noum,
                    best_epoch: r.best_epoch,
                });
            }
        }
        rows
    }
}

/// Row of the long-format results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub game: Game,
    pub mode: Mode,
    pub architecture: Architecture,
    pub alphabet: Option<usize>,
    pub word_length: usize,
    pub message_length: usize,
    pub regime: Option<QuantizeRegime>,
    pub seed: u64,
    pub n: usize,
    pub accuracy: Option<f64>,
    pub noum: Option<usize>,
    pub best_epoch: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
    write_bytes(path, &bytes)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Provenance written beside each report; kept separate so reports stay
/// byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, wall_time_seconds: f64) -> Self {
        RunManifest {
            seeds: config.seeds.clone(),
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds,
        }
    }
}

/// Order of configuration blocks in the comparison table.
const BLOCK_ORDER: [(Mode, Architecture); 6] = [
    (Mode::Continuous, Architecture::Recurrent),
    (Mode::GumbelSoftmax, Architecture::Recurrent),
    (Mode::Quantized, Architecture::Recurrent),
    (Mode::Continuous, Architecture::Instant),
    (Mode::GumbelSoftmax, Architecture::Instant),
    (Mode::Quantized, Architecture::Instant),
];

/// Finds every `report.json` below `dir`, in sorted path order.
pub fn find_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "report.json") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Comparison table with one `avg` and one `std` row per configuration,
/// columns per candidate count, blocks ordered CN/GS/QT over RNN then Inst.
pub fn comparison_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut counts: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.aggregate.iter().map(|a| a.n))
        .collect();
    counts.sort_unstable();
    counts.dedup();
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by_key(|r| {
        let ch = &r.config.channel;
        let block = BLOCK_ORDER
            .iter()
            .position(|&(m, a)| m == ch.mode && a == ch.architecture)
            .unwrap_or(BLOCK_ORDER.len());
        (block, r.config.game.tag(), r.label.clone())
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "comm_type".to_string(),
        "game".into(),
        "alphabet".into(),
        "word_length".into(),
        "message_length".into(),
        "regime".into(),
        "seeds".into(),
        "stat".into(),
    ];
    header.extend(counts.iter().map(|n| n.to_string()));
    header.push("noum".into());
    w.write_record(&header)?;
    for r in sorted {
        let ch = &r.config.channel;
        let base = vec![
            format!("{}-{}", ch.mode.tag(), ch.architecture.tag()),
            r.config.game.tag().to_string(),
            ch.alphabet_size.map(|v| v.to_string()).unwrap_or_else(|| "N/A".into()),
            ch.word_length.to_string(),
            ch.message_length.to_string(),
            if ch.mode == Mode::Quantized {
                ch.quantize_regime.to_string()
            } else {
                "N/A".into()
            },
            r.runs.len().to_string(),
        ];
        for (stat, pick) in [("avg", 0usize), ("std", 1)] {
            let mut rec = base.clone();
            rec.push(stat.into());
            for n in &counts {
                let s = r.aggregate.iter().find(|a| a.n == *n).and_then(|a| a.accuracy);
                rec.push(match s {
                    Some(s) => format!("{:.3}", if pick == 0 { s.mean } else { s.std }),
                    None => String::new(),
                });
            }
            rec.push(match r.noum {
                Some(s) => format!("{:.1}", if pick == 0 { s.mean } else { s.std }),
                None => "n/a".into(),
            });
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Contract(e.to_string()))
}
