//! Multi-word messages: a GRU sender emits six quantized words and a GRU
//! receiver reads them back one at a time.
//!
//!     cargo run --release --example recurrent_channel

use qcomm::agents::{decode_targets, Agents};
use qcomm::channel::{Architecture, ChannelSpec, QuantizeRegime};
use qcomm::experiment::{replicate, ExperimentConfig, Game, GameData};

fn main() -> qcomm::Result<()> {
    let channel = ChannelSpec::quantized(Architecture::Recurrent, 4, 8, 6, QuantizeRegime::InferOnly);
    println!("capacity per word {}, per message {}", channel.word_capacity().unwrap(), channel.message_capacity().unwrap());

    let mut cfg = ExperimentConfig::new(Game::ObjectReferential, channel);
    cfg.world.num_attributes = 3;
    cfg.world.values_per_attribute = 6;
    cfg.agents.hidden = Some(64);
    cfg.trainer.learning_rate = 1e-3;
    cfg.trainer.epochs = 30;
    cfg.seeds = vec![1];

    let (report, runs) = replicate(&cfg, &|log| eprintln!("epoch {:>2} loss {:.4}", log.epoch, log.train_loss))?;
    for row in &report.aggregate {
        println!("n = {:>4}  accuracy {:.3}", row.n, row.accuracy.map_or(f64::NAN, |s| s.mean));
    }

    let agents: &Agents = &runs[0].agents;
    let data = GameData::new(&report.config)?;
    let shown = &data.split.test[..3];
    let decoded = decode_targets(agents, &data.sender_batch(shown))?;
    let sym = decoded.symbols.expect("quantized inference is discrete");
    for (i, &obj) in shown.iter().enumerate() {
        println!("object {:?}:", data.world.attributes(obj));
        for word in sym.message(i).chunks(sym.word_length) {
            println!("    {word:?}");
        }
    }
    Ok(())
}
