//! Classification game: the receiver picks the target's class (its first
//! attribute) among class candidates. Solving it needs only one distinct
//! message per class.
//!
//!     cargo run --release --example classification

use qcomm::channel::{Architecture, ChannelSpec, QuantizeRegime};
use qcomm::experiment::{replicate, ExperimentConfig, Game};

fn main() -> qcomm::Result<()> {
    let channel = ChannelSpec::quantized(Architecture::Instant, 10, 20, 1, QuantizeRegime::InferOnly);
    let mut cfg = ExperimentConfig::new(Game::ObjectClassification, channel);
    cfg.world.num_attributes = 3;
    cfg.world.values_per_attribute = 10;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.epochs = 30;
    cfg.seeds = vec![1];

    let (report, _) = replicate(&cfg, &|_| {})?;
    let k = report.config.num_classes();
    println!("{} classes", k);
    for row in &report.aggregate {
        println!("n = {:>3}  accuracy {:.3}", row.n, row.accuracy.map_or(f64::NAN, |s| s.mean));
    }
    let noum = report.noum.map(|s| s.mean).unwrap_or(0.0);
    println!("NoUM {noum} (at least {k} is needed for perfect accuracy)");
    Ok(())
}
