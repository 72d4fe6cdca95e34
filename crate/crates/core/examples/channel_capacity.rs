//! How many distinct messages each channel configuration can carry, next
//! to the 10^4 objects of the full world.
//!
//!     cargo run --example channel_capacity

use qcomm::channel::{Architecture, ChannelSpec, QuantizeRegime};

fn main() {
    let configs = [
        ChannelSpec::gumbel(Architecture::Instant, 100, 1),
        ChannelSpec::gumbel(Architecture::Recurrent, 10, 6),
        ChannelSpec::quantized(Architecture::Instant, 2, 10, 1, QuantizeRegime::InferOnly),
        ChannelSpec::quantized(Architecture::Instant, 2, 14, 1, QuantizeRegime::InferOnly),
        ChannelSpec::quantized(Architecture::Instant, 10, 4, 1, QuantizeRegime::InferOnly),
        ChannelSpec::quantized(Architecture::Instant, 10, 100, 1, QuantizeRegime::InferOnly),
        ChannelSpec::quantized(Architecture::Recurrent, 10, 100, 6, QuantizeRegime::InferOnly),
    ];
    println!("{:<10} {:>4} {:>5} {:>3} {:>12} {:>14} {:>9}", "channel", "v", "word", "m", "per word", "per message", "≥ 10^4?");
    for c in &configs {
        let word = c.word_capacity().expect("discrete");
        let msg = c.message_capacity().expect("discrete");
        println!(
            "{:<10} {:>4} {:>5} {:>3} {:>12} {:>14} {:>9}",
            c.label(),
            c.alphabet_size.unwrap(),
            c.word_length,
            c.message_length,
            word.to_string(),
            msg.to_string(),
            if msg.log10() >= 4.0 { "yes" } else { "no" }
        );
    }
}
