//! Train, write a checkpoint, reload it into fresh agents and re-evaluate
//! with the same episode seed.
//!
//!     cargo run --release --example checkpoint_eval

use qcomm::agents::{load_checkpoint, save_checkpoint};
use qcomm::channel::{Architecture, ChannelSpec};
use qcomm::experiment::{evaluate, init_agents, replicate, ExperimentConfig, Game, GameData};

fn main() -> qcomm::Result<()> {
    let channel = ChannelSpec::continuous(Architecture::Instant, 32, 1);
    let mut cfg = ExperimentConfig::new(Game::ObjectReferential, channel);
    cfg.world.num_attributes = 3;
    cfg.world.values_per_attribute = 6;
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.epochs = 20;
    cfg.seeds = vec![4];

    let (report, runs) = replicate(&cfg, &|_| {})?;
    let cfg = report.config.clone();
    let dir = std::env::temp_dir().join("qcomm-checkpoint-example");
    let path = dir.join("seed-4.bin");
    save_checkpoint(&runs[0].agents.params, &path)?;

    let mut agents = init_agents(&cfg, 4)?;
    agents.params.load_from(&load_checkpoint(&path)?)?;
    let data = GameData::new(&cfg)?;
    let counts = cfg.eval.candidate_counts.clone().unwrap_or_default();
    let again = evaluate(&agents, &data, &counts, 4)?;

    for (a, b) in report.runs[0].test.results.iter().zip(&again.results) {
        println!("n = {:>4}  trained {:.4}  reloaded {:.4}", a.n, a.accuracy.unwrap(), b.accuracy.unwrap());
    }
    println!("identical: {}", report.runs[0].test == again);
    println!("checkpoint at {}", path.display());
    Ok(())
}
