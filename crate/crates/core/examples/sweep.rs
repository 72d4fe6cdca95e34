//! A small alphabet × word-length sweep. Prints the accuracy heatmap and
//! the per-word-length means.
//!
//!     cargo run --release --example sweep

use qcomm::channel::{Architecture, ChannelSpec, QuantizeRegime};
use qcomm::experiment::{run_sweep, ExperimentConfig, Game, SweepCell, SweepConfig};

fn main() -> qcomm::Result<()> {
    let channel = ChannelSpec::quantized(Architecture::Instant, 2, 1, 1, QuantizeRegime::InferOnly);
    let mut cfg = ExperimentConfig::new(Game::ObjectReferential, channel);
    cfg.world.num_attributes = 3;
    cfg.world.values_per_attribute = 6;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.epochs = 20;
    cfg.seeds = vec![1];
    cfg.sweep = Some(SweepConfig {
        alphabet_sizes: vec![2, 4, 10],
        word_lengths: vec![1, 2, 5, 10],
        regimes: vec![QuantizeRegime::InferOnly],
    });

    let grid = run_sweep(&cfg, 1, &|_| {})?;
    let regime = QuantizeRegime::InferOnly;
    println!("accuracy at n = pool size");
    print!("{}", grid.heatmap_csv(regime, SweepCell::headline_accuracy));
    println!("NoUM");
    print!("{}", grid.heatmap_csv(regime, SweepCell::noum));
    let means: Vec<String> = grid
        .column_means(regime)
        .iter()
        .map(|m| m.map_or("-".into(), |x| format!("{x:.3}")))
        .collect();
    println!("column means {}", means.join(" "));
    Ok(())
}
