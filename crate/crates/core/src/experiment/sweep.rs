use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::QuantizeRegime;
use crate::error::{Error, Result};

use super::config::{ExperimentConfig, SweepConfig};
use super::report::{self, LongRow, MetricsReport};
use super::{replicate, EpochLog};

/// One (alphabet, word length, regime) cell: a finished report or the
/// reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alphabet: usize,
    pub word_length: usize,
    pub regime: QuantizeRegime,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

impl SweepCell {
    /// Seed-mean accuracy at the largest evaluated candidate count.
    pub fn headline_accuracy(&self) -> Option<f64> {
        let r = self.report.as_ref()?;
        let n = r.aggregate.iter().map(|a| a.n).max()?;
        r.mean_accuracy(n)
    }

    pub fn noum(&self) -> Option<f64> {
        self.report.as_ref()?.noum.map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub grid: SweepConfig,
    /// Regime-major, then alphabet, then word length.
    pub cells: Vec<SweepCell>,
}

/// Config of one cell. Agent widths left unset in `base` follow the cell's
/// word length.
pub fn cell_config(base: &ExperimentConfig, alphabet: usize, word_length: usize, regime: QuantizeRegime) -> ExperimentConfig {
    let mut c = base.clone();
    c.sweep = None;
    c.channel.alphabet_size = Some(alphabet);
    c.channel.word_length = word_length;
    c.channel.quantize_regime = regime;
    c
}

/// Trains every cell of the grid (up to `jobs` in parallel). Cell failures
/// are recorded and do not stop the sweep.
pub fn run_sweep(base: &ExperimentConfig, jobs: usize, on_epoch: &(dyn Fn(&EpochLog) + Sync)) -> Result<SweepGrid> {
    base.resolve()?;
    let grid = base.sweep.clone().unwrap_or_default();
    let mut keys = Vec::new();
    for &regime in &grid.regimes {
        for &v in &grid.alphabet_sizes {
            for &w in &grid.word_lengths {
                keys.push((v, w, regime));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        keys.par_iter()
            .map(|&(alphabet, word_length, regime)| {
                let cfg = cell_config(base, alphabet, word_length, regime);
                let (report, error) = match replicate(&cfg, on_epoch) {
                    Ok((r, _)) if r.runs.is_empty() => {
                        let e = r.failures.first().map(|f| f.error.clone());
                        (Some(r), e)
                    }
                    Ok((r, _)) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepCell {
                    alphabet,
                    word_length,
                    regime,
                    report,
                    error,
                }
            })
            .collect()
    });
    Ok(SweepGrid {
        base: base.clone(),
        grid,
        cells,
    })
}

impl SweepGrid {
    pub fn cell(&self, alphabet: usize, word_length: usize, regime: QuantizeRegime) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.alphabet == alphabet && c.word_length == word_length && c.regime == regime)
    }

    /// Matrix with rows = alphabet sizes, columns = word lengths.
    pub fn matrix(&self, regime: QuantizeRegime, value: impl Fn(&SweepCell) -> Option<f64>) -> Vec<Vec<Option<f64>>> {
        self.grid
            .alphabet_sizes
            .iter()
            .map(|&v| {
                self.grid
                    .word_lengths
                    .iter()
                    .map(|&w| self.cell(v, w, regime).and_then(&value))
                    .collect()
            })
            .collect()
    }

    /// Headline accuracy averaged over alphabet sizes, per word length.
    pub fn column_means(&self, regime: QuantizeRegime) -> Vec<Option<f64>> {
        let m = self.matrix(regime, SweepCell::headline_accuracy);
        (0..self.grid.word_lengths.len())
            .map(|j| {
                let col: Vec<f64> = m.iter().filter_map(|row| row[j]).collect();
                (!col.is_empty()).then(|| col.iter().sum::<f64>() / col.len() as f64)
            })
            .collect()
    }

    pub fn heatmap_csv(&self, regime: QuantizeRegime, value: impl Fn(&SweepCell) -> Option<f64>) -> String {
        let mut s = String::from("alphabet\\word_length");
        for w in &self.grid.word_lengths {
            write!(s, ",{w}").expect("string write");
        }
        s.push('\n');
        for (v, row) in self.grid.alphabet_sizes.iter().zip(self.matrix(regime, value)) {
            write!(s, "{v}").expect("string write");
            for x in row {
                match x {
                    Some(x) => write!(s, ",{x}").expect("string write"),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn long_rows(&self) -> Vec<LongRow> {
        self.cells
            .iter()
            .filter_map(|c| c.report.as_ref())
            .flat_map(|r| r.long_rows())
            .collect()
    }

    /// Writes `sweep.json`, `sweep_long.csv`, per-regime heatmaps and each
    /// cell's report under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        report::write_text(&dir.join("sweep.json"), &serde_json::to_string_pretty(self)?)?;
        report::write_csv(&dir.join("sweep_long.csv"), &self.long_rows())?;
        for regime in &self.grid.regimes {
            report::write_text(
                &dir.join(format!("heatmap_accuracy_{regime}.csv")),
                &self.heatmap_csv(*regime, SweepCell::headline_accuracy),
            )?;
            report::write_text(&dir.join(format!("heatmap_noum_{regime}.csv")), &self.heatmap_csv(*regime, SweepCell::noum))?;
        }
        for cell in &self.cells {
            if let Some(r) = &cell.report {
                let cdir = dir.join("cells").join(&r.label);
                r.write(&cdir.join("report.json"))?;
                report::write_csv(&cdir.join("results.csv"), &r.long_rows())?;
            }
        }
        Ok(())
    }
}
