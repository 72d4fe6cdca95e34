//! Two-agent emergent-communication games with continuous, Gumbel-softmax
//! and quantized message channels.

pub mod adam;
pub mod agents;
pub mod channel;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod world;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use params::{Gradients, ParamId, ParamSet};
pub use rng::Rng;
pub use tensor::Tensor;
