//! Parameterized layers recorded onto a [`Graph`].

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;

/// Fully connected layer `y = x Wᵀ + b` with `W [out×in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(params: &mut ParamSet, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = params.add_glorot(format!("{name}.weight"), out_dim, in_dim, rng);
        let bias = params.add_zeros(format!("{name}.bias"), &[out_dim]);
        Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matmul_t(x, w, false, true)?;
        g.add_row_bias(y, b)
    }
}

/// Gated recurrent unit with PyTorch gate layout (reset, update, candidate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruParams {
    pub fn new(params: &mut ParamSet, name: &str, input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        // Glorot per gate block, then stacked.
        let limit_i = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let limit_h = (6.0 / (2 * hidden_dim) as f64).sqrt();
        let w_ih: Vec<f64> = (0..3 * hidden_dim * input_dim)
            .map(|_| rng.uniform_range(-limit_i, limit_i))
            .collect();
        let w_hh: Vec<f64> = (0..3 * hidden_dim * hidden_dim)
            .map(|_| rng.uniform_range(-limit_h, limit_h))
            .collect();
        use crate::tensor::Tensor;
        let w_ih = params.add(
            format!("{name}.w_ih"),
            Tensor::new(vec![3 * hidden_dim, input_dim], w_ih).expect("shape"),
        );
        let w_hh = params.add(
            format!("{name}.w_hh"),
            Tensor::new(vec![3 * hidden_dim, hidden_dim], w_hh).expect("shape"),
        );
        let b_ih = params.add_zeros(format!("{name}.b_ih"), &[3 * hidden_dim]);
        let b_hh = params.add_zeros(format!("{name}.b_hh"), &[3 * hidden_dim]);
        GruParams {
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            input_dim,
            hidden_dim,
        }
    }

    /// One recurrent step: `state [b×H]`, `input [b×E]` to the next state.
    pub fn step(&self, g: &mut Graph, state: NodeId, input: NodeId) -> Result<NodeId> {
        gru_step(g, state, input, self)
    }
}

pub fn gru_step(g: &mut Graph, state: NodeId, input: NodeId, p: &GruParams) -> Result<NodeId> {
    let w_ih = g.param(p.w_ih);
    let w_hh = g.param(p.w_hh);
    let b_ih = g.param(p.b_ih);
    let b_hh = g.param(p.b_hh);
    let gi = g.matmul_t(input, w_ih, false, true)?;
    let gi = g.add_row_bias(gi, b_ih)?;
    let gh = g.matmul_t(state, w_hh, false, true)?;
    let gh = g.add_row_bias(gh, b_hh)?;
    g.gru_gates(gi, gh, state)
}
