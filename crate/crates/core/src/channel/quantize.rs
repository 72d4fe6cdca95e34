//! Message normalization and the uniform quantize/dequantize operator.

use serde::{Deserialize, Serialize};

use super::spec::{scaling_factor, QuantizerScheme};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NORMALIZE_EPS};
use crate::tensor::Tensor;

/// Inputs may exceed `[0, 1]` by this much before quantization refuses them.
pub const RANGE_TOLERANCE: f64 = 1e-9;

/// Per-word min-max normalization of a flat buffer made of consecutive
/// words of `word_length` values. Constant words map to zeros.
pub fn normalize(values: &[f64], word_length: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for (o, word) in out.chunks_mut(word_length).zip(values.chunks(word_length)) {
        let lo = word.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = word.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r = hi - lo;
        if r > NORMALIZE_EPS {
            for (o, &v) in o.iter_mut().zip(word) {
                *o = (v - lo) / r;
            }
        }
    }
    out
}

/// Uniform quantizer on `[0, 1]` with zero point 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub scale: f64,
    pub max_symbol: u32,
}

impl Quantizer {
    pub fn new(scheme: QuantizerScheme, alphabet_size: usize) -> Result<Self> {
        let scale = scaling_factor(scheme, alphabet_size)?;
        let max_symbol = match scheme {
            QuantizerScheme::Levels => alphabet_size - 1,
            QuantizerScheme::Paper => alphabet_size,
        } as u32;
        Ok(Quantizer { scale, max_symbol })
    }

    /// Number of representable symbols.
    pub fn levels(&self) -> usize {
        self.max_symbol as usize + 1
    }

    /// Symbol for one normalized value: round half away from zero, clamped.
    pub fn symbol(&self, x: f64) -> Result<u32> {
        if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&x) {
            return Err(Error::Contract(format!(
                "quantizer input {x} lies outside [0, 1]"
            )));
        }
        let s = (x / self.scale).round();
        Ok(s.clamp(0.0, self.max_symbol as f64) as u32)
    }

    pub fn dequantize(&self, symbol: u32) -> f64 {
        symbol as f64 * self.scale
    }

    /// Quantizes a buffer of normalized values, returning the dequantized
    /// values and the integer symbols.
    pub fn quantize(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<u32>)> {
        let symbols = values
            .iter()
            .map(|&x| self.symbol(x))
            .collect::<Result<Vec<u32>>>()?;
        let deq = symbols.iter().map(|&s| self.dequantize(s)).collect();
        Ok((deq, symbols))
    }
}

/// Quantizes one normalized word.
pub fn quantize_word(word: &Tensor, quantizer: &Quantizer) -> Result<(Tensor, Vec<u32>)> {
    let (deq, symbols) = quantizer.quantize(word.data())?;
    Ok((Tensor::new(word.shape().to_vec(), deq)?, symbols))
}

/// Quantized forward pass with identity backward (straight-through
/// estimator). Returns the tape node and the emitted symbols.
pub fn ste_quantize(g: &mut Graph, x: NodeId, quantizer: &Quantizer) -> Result<(NodeId, Vec<u32>)> {
    let (deq, symbols) = quantize_word(g.value(x), quantizer)?;
    let node = g.straight_through(x, deq)?;
    Ok((node, symbols))
}
