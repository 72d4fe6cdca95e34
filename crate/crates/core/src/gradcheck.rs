//! Central finite-difference check of tape gradients.

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;

/// Scalar probe `sum(out ⊙ w)` with a fixed random `w` in [-1, 1), so every
/// output element contributes with a distinct weight.
fn probe(g: &mut Graph, out: NodeId) -> Result<NodeId> {
    let shape = g.value(out).shape().to_vec();
    let w = Rng::new(99, "probe").uniform_tensor(&shape);
    let w = w.data().iter().map(|v| 2.0 * v - 1.0).collect();
    let w = g.constant(Tensor::new(shape, w)?)?;
    let m = g.mul(out, w)?;
    g.sum(m)
}

fn probe_value<F>(params: &ParamSet, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    let mut g = Graph::inference(params);
    let out = f(&mut g)?;
    let l = probe(&mut g, out)?;
    Ok(g.value(l).item())
}

/// Largest per-tensor relative error `‖analytic − numeric‖ / max(‖analytic‖,
/// ‖numeric‖)` over every tensor in `params`, for the graph built by `f`.
/// Tensors whose gradients are both zero count as exact.
pub fn max_relative_error<F>(params: &mut ParamSet, f: F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    let grads = {
        let mut g = Graph::new(params);
        let out = f(&mut g)?;
        let l = probe(&mut g, out)?;
        g.backward(l)?
    };
    let ids: Vec<ParamId> = params.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = grads
            .get(id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; params.get(id).len()]);
        let mut numeric = vec![0.0; analytic.len()];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = orig + STEP;
            let up = probe_value(params, &f);
            params.get_mut(id).data_mut()[k] = orig - STEP;
            let down = probe_value(params, &f);
            params.get_mut(id).data_mut()[k] = orig;
            *slot = (up? - down?) / (2.0 * STEP);
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = na.max(nn);
        if denom > 0.0 {
            worst = worst.max(diff / denom);
        }
    }
    Ok(worst)
}

/// Adds a tensor with entries uniform in [-1, 1).
pub fn random_param(ps: &mut ParamSet, name: &str, shape: &[usize], rng: &mut Rng) -> ParamId {
    let t = rng.uniform_tensor(shape);
    let data = t.data().iter().map(|v| 2.0 * v - 1.0).collect();
    ps.add(name, Tensor::new(shape.to_vec(), data).expect("shape matches data"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        let mut rng = Rng::new(1, "gc");
        let mut ps = ParamSet::new();
        let x = random_param(&mut ps, "x", &[2, 3], &mut rng);
        // straight-through with a different forward value breaks the
        // identity between forward and backward
        let err = max_relative_error(&mut ps, |g| {
            let x = g.param(x);
            let fwd = g.value(x).data().iter().map(|v| v * v).collect();
            let fwd = Tensor::new(vec![2, 3], fwd)?;
            g.straight_through(x, fwd)
        })
        .unwrap();
        assert!(err > 0.1, "{err}");
    }
}
