//! Relaxed one-hot words during training versus the hard argmax sent at
//! inference.
//!
//!     cargo run --example gumbel_softmax

use qcomm::channel::{gumbel_softmax_word, Architecture, ChannelSpec};
use qcomm::{Graph, ParamSet, Rng, Tensor};

fn main() -> qcomm::Result<()> {
    let spec = ChannelSpec::gumbel(Architecture::Instant, 5, 1);
    let logits = Tensor::from_rows(&[vec![0.5, 2.0, -1.0, 0.0, 1.5], vec![3.0, 3.0, 0.0, 0.0, 0.0]]);
    let ps = ParamSet::new();
    let mut rng = Rng::new(3, "gumbel-noise");

    let mut g = Graph::new(&ps);
    let l = g.constant(logits.clone())?;
    for draw in 0..3 {
        let w = gumbel_softmax_word(&mut g, l, &mut rng, &spec, true)?;
        println!("training draw {draw}:");
        for i in 0..2 {
            let row = g.value(w).row(i);
            let sum: f64 = row.iter().sum();
            println!("  {}  (sum {sum:.12})", row.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "));
        }
    }

    let w = gumbel_softmax_word(&mut g, l, &mut rng, &spec, false)?;
    println!("inference (ties go to the lowest index):");
    for i in 0..2 {
        println!("  {:?}", g.value(w).row(i));
    }
    Ok(())
}
