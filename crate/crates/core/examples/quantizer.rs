//! Normalize a word, quantize it at several alphabet sizes and check the
//! round-trip error against half the grid spacing.
//!
//!     cargo run --example quantizer

use qcomm::channel::{normalize, Quantizer, QuantizerScheme};
use qcomm::Rng;

fn main() -> qcomm::Result<()> {
    let mut rng = Rng::new(7, "example");
    let raw: Vec<f64> = (0..8).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
    let word = normalize(&raw, raw.len());
    println!("raw        {}", fmt(&raw));
    println!("normalized {}", fmt(&word));

    for v in [2, 3, 10, 100] {
        let q = Quantizer::new(QuantizerScheme::Levels, v)?;
        let (deq, symbols) = q.quantize(&word)?;
        let err = deq.iter().zip(&word).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("\nv = {v:<3}  S = {:.4}  max error {err:.4} (bound {:.4})", q.scale, q.scale / 2.0);
        println!("  symbols     {symbols:?}");
        println!("  dequantized {}", fmt(&deq));
    }
    Ok(())
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:6.3}")).collect::<Vec<_>>().join(" ")
}
