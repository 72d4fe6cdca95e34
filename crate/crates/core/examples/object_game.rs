//! Train a quantized Instant channel on the 216-object world and compare
//! against untrained agents.
//!
//!     cargo run --release --example object_game

use qcomm::channel::{Architecture, ChannelSpec, QuantizeRegime};
use qcomm::experiment::{replicate, untrained_accuracy, ExperimentConfig, Game, GameData};

fn main() -> qcomm::Result<()> {
    let channel = ChannelSpec::quantized(Architecture::Instant, 10, 100, 1, QuantizeRegime::InferOnly);
    let mut cfg = ExperimentConfig::new(Game::ObjectReferential, channel);
    cfg.world.num_attributes = 3;
    cfg.world.values_per_attribute = 6;
    cfg.trainer.learning_rate = 1e-3;
    cfg.seeds = vec![1, 2];

    let (report, runs) = replicate(&cfg, &|log| {
        if log.epoch % 10 == 0 {
            eprintln!("seed {} epoch {:>2} loss {:.4} val {:.3}", log.seed, log.epoch, log.train_loss, log.validation_accuracy);
        }
    })?;

    let data = GameData::new(&report.config)?;
    println!("{}  ({} objects, {} test targets)", report.label, data.world.len(), data.split.test.len());
    println!("{:>6} {:>8} {:>8} {:>10}", "n", "mean", "std", "untrained");
    for row in &report.aggregate {
        let s = row.accuracy.expect("every seed trained");
        let base = untrained_accuracy(&report.config, &data, row.n, 500, 1)?;
        println!("{:>6} {:>8.3} {:>8.3} {:>10.3}", row.n, s.mean, s.std, base);
    }
    for r in &runs {
        println!("seed {}: best epoch {}, NoUM {:?}", r.report.seed, r.report.best_epoch, r.report.test.noum);
    }
    Ok(())
}
