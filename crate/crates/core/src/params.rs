//! Named parameter tensors and their gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Ordered collection of learnable tensors. Registration order is the
/// canonical order for optimizers and checkpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.params.push(Param { name, value });
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform weight of shape `[fan_out, fan_in]`.
    pub fn add_glorot(&mut self, name: impl Into<String>, fan_out: usize, fan_in: usize, rng: &mut Rng) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_out * fan_in)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        self.add(name, Tensor::new(vec![fan_out, fan_in], data).expect("glorot shape"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Replaces every tensor with the same-named tensor from `other`,
    /// requiring identical names, order and shapes.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        for (i, mine) in self.params.iter().enumerate() {
            match other.params.get(i) {
                None => {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{}` {:?} is missing",
                        mine.name,
                        mine.value.shape()
                    )))
                }
                Some(theirs) if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() => {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{}` {:?} does not match `{}` {:?}",
                        mine.name,
                        mine.value.shape(),
                        theirs.name,
                        theirs.value.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = other.params.get(self.params.len()) {
            return Err(Error::Checkpoint(format!("unexpected tensor `{}`", extra.name)));
        }
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            mine.value = theirs.value.clone();
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn new(n: usize) -> Self {
        Gradients {
            grads: vec![None; n],
        }
    }

    pub(crate) fn set(&mut self, id: ParamId, grad: Tensor) {
        self.grads[id.0] = Some(grad);
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, Option<&Tensor>)> {
        self.grads
            .iter()
            .enumerate()
            .map(|(i, g)| (ParamId(i), g.as_ref()))
    }
}
