//! Gumbel-softmax relaxation of one categorical word.

use super::spec::ChannelSpec;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Index of the row maximum; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot_rows(values: &Tensor) -> Result<Tensor> {
    let (m, n) = values.dims2()?;
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        out[i * n + argmax(values.row(i))] = 1.0;
    }
    Tensor::new(vec![m, n], out)
}

/// Standard Gumbel noise `-ln(-ln u)`, `u ~ U(0, 1)`.
pub fn gumbel_noise(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| -(-rng.uniform_open().ln()).ln()).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches")
}

/// Samples a relaxed one-hot word from `logits [b×v]`.
///
/// Training draws `softmax((logits + g) / τ)`, optionally hardened to a
/// one-hot forward value with an identity backward. Inference returns the
/// exact one-hot argmax of the logits without sampling.
pub fn gumbel_softmax_word(
    g: &mut Graph,
    logits: NodeId,
    rng: &mut Rng,
    spec: &ChannelSpec,
    training: bool,
) -> Result<NodeId> {
    let tau = spec.gs_temperature;
    if !(tau > 0.0) {
        return Err(Error::Config(format!(
            "Gumbel-softmax temperature must be positive, got {tau}"
        )));
    }
    if !training {
        let hard = one_hot_rows(g.value(logits))?;
        return g.straight_through(logits, hard);
    }
    let noise = gumbel_noise(rng, g.value(logits).shape());
    let noise = g.constant(noise)?;
    let perturbed = g.add(logits, noise)?;
    let scaled = g.scale(perturbed, 1.0 / tau)?;
    let soft = g.softmax(scaled)?;
    if spec.gs_straight_through {
        let hard = one_hot_rows(g.value(soft))?;
        g.straight_through(soft, hard)
    } else {
        Ok(soft)
    }
}
