//! Communication channels: message construction on the sender side and
//! message decoding on the receiver side, for the continuous,
//! Gumbel-softmax and quantized modes over Instant and Recurrent
//! architectures.

pub mod gumbel;
pub mod quantize;
pub mod spec;

pub use gumbel::{argmax, gumbel_softmax_word};
pub use quantize::{normalize, quantize_word, ste_quantize, Quantizer};
pub use spec::{
    capacity, scaling_factor, Architecture, Capacity, ChannelSpec, Mode, QuantizeRegime,
    QuantizerScheme,
};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{GruParams, Linear};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Discrete view of a message batch, laid out `[b × message_length × word_length]`.
///
/// Quantized words hold quantizer symbols. Gumbel-softmax words hold the
/// one-hot vector as 0/1 integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbols {
    pub batch: usize,
    pub message_length: usize,
    pub word_length: usize,
    pub data: Vec<u32>,
}

impl Symbols {
    /// Symbols of one full message (all words concatenated).
    pub fn message(&self, i: usize) -> &[u32] {
        let w = self.message_length * self.word_length;
        &self.data[i * w..(i + 1) * w]
    }

    /// Collapses one-hot words to one symbol index per word.
    pub fn one_hot_indices(&self) -> Vec<Vec<usize>> {
        (0..self.batch)
            .map(|i| {
                self.message(i)
                    .chunks(self.word_length)
                    .map(|word| word.iter().position(|&s| s == 1).unwrap_or(0))
                    .collect()
            })
            .collect()
    }
}

/// A message recorded on the tape. `symbols` is absent whenever the
/// forward pass carried a non-discrete message.
#[derive(Debug, Clone)]
pub struct Message {
    pub node: NodeId,
    pub symbols: Option<Symbols>,
    pub mode: Mode,
}

/// Detached message batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageBatch {
    /// `[b × message_length × word_length]`
    pub dequantized: Tensor,
    pub symbols: Option<Symbols>,
    pub mode: Mode,
}

impl Message {
    pub fn to_batch(&self, g: &Graph, spec: &ChannelSpec) -> Result<MessageBatch> {
        let v = g.value(self.node);
        let (b, _) = v.dims2()?;
        Ok(MessageBatch {
            dequantized: v
                .clone()
                .reshape(&[b, spec.message_length, spec.word_length])?,
            symbols: self.symbols.clone(),
            mode: self.mode,
        })
    }
}

impl MessageBatch {
    pub fn batch_size(&self) -> usize {
        self.dequantized.shape()[0]
    }

    /// Places the batch on a tape as a `[b × (message_length·word_length)]` leaf.
    pub fn to_node(&self, g: &mut Graph) -> Result<NodeId> {
        let s = self.dequantized.shape();
        if s.len() != 3 {
            return Err(Error::dim("message", format!("expected rank 3, got {s:?}")));
        }
        let flat = self.dequantized.clone().reshape(&[s[0], s[1] * s[2]])?;
        g.constant(flat)
    }
}

/// Turns one pre-activation word `[b × word_length]` into the transmitted
/// word according to the mode, regime and phase.
fn emit_word(
    g: &mut Graph,
    pre: NodeId,
    spec: &ChannelSpec,
    rng: &mut Rng,
    training: bool,
) -> Result<(NodeId, Option<Vec<u32>>)> {
    match spec.mode {
        Mode::Continuous => Ok((g.normalize(pre, spec.word_length)?, None)),
        Mode::Quantized => {
            let normed = g.normalize(pre, spec.word_length)?;
            if training && spec.quantize_regime == QuantizeRegime::InferOnly {
                return Ok((normed, None));
            }
            let q = Quantizer::new(spec.quantizer_scheme, spec.alphabet()?)?;
            let (node, symbols) = ste_quantize(g, normed, &q)?;
            Ok((node, Some(symbols)))
        }
        Mode::GumbelSoftmax => {
            let word = gumbel_softmax_word(g, pre, rng, spec, training)?;
            if training {
                return Ok((word, None));
            }
            let symbols = g.value(word).data().iter().map(|&v| v as u32).collect();
            Ok((word, Some(symbols)))
        }
    }
}

fn assemble(
    words: Vec<(NodeId, Option<Vec<u32>>)>,
    g: &mut Graph,
    spec: &ChannelSpec,
) -> Result<Message> {
    let batch = g.value(words[0].0).dims2()?.0;
    let nodes: Vec<NodeId> = words.iter().map(|(n, _)| *n).collect();
    let node = if nodes.len() == 1 {
        nodes[0]
    } else {
        g.concat_cols(&nodes)?
    };
    let symbols = if words.iter().all(|(_, s)| s.is_some()) {
        let wl = spec.word_length;
        let mut data = Vec::with_capacity(batch * spec.message_width());
        for i in 0..batch {
            for (_, s) in &words {
                data.extend_from_slice(&s.as_ref().expect("checked")[i * wl..(i + 1) * wl]);
            }
        }
        Some(Symbols {
            batch,
            message_length: spec.message_length,
            word_length: wl,
            data,
        })
    } else {
        None
    };
    Ok(Message {
        node,
        symbols,
        mode: spec.mode,
    })
}

/// Sender-side channel network.
#[derive(Debug, Clone)]
pub enum SenderChannel {
    Instant {
        out: Linear,
    },
    Recurrent {
        gru: GruParams,
        out: Linear,
        /// Absent for single-word messages, where no word is fed back.
        embed: Option<Linear>,
        start: ParamId,
    },
}

impl SenderChannel {
    pub fn new(params: &mut ParamSet, spec: &ChannelSpec, hidden: usize, embed_dim: usize, rng: &mut Rng) -> Self {
        match spec.architecture {
            Architecture::Instant => SenderChannel::Instant {
                out: Linear::new(params, "sender.channel.out", hidden, spec.word_length, rng),
            },
            Architecture::Recurrent => {
                let start = params.add_glorot("sender.channel.start", 1, embed_dim, rng);
                let gru = GruParams::new(params, "sender.channel.gru", embed_dim, hidden, rng);
                let out = Linear::new(params, "sender.channel.out", hidden, spec.word_length, rng);
                let embed = (spec.message_length > 1).then(|| {
                    Linear::new(params, "sender.channel.embed", spec.word_length, embed_dim, rng)
                });
                SenderChannel::Recurrent {
                    gru,
                    out,
                    embed,
                    start,
                }
            }
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            SenderChannel::Instant { .. } => Architecture::Instant,
            SenderChannel::Recurrent { .. } => Architecture::Recurrent,
        }
    }
}

/// Single-word message from the encoded target `[b×h]`.
pub fn instant_send(
    g: &mut Graph,
    encoded: NodeId,
    channel: &SenderChannel,
    spec: &ChannelSpec,
    rng: &mut Rng,
    training: bool,
) -> Result<Message> {
    let SenderChannel::Instant { out } = channel else {
        return Err(Error::Config(
            "instant_send needs an instant sender channel".into(),
        ));
    };
    if spec.architecture != Architecture::Instant {
        return Err(Error::Config("channel spec is not instant".into()));
    }
    let pre = out.forward(g, encoded)?;
    let word = emit_word(g, pre, spec, rng, training)?;
    assemble(vec![word], g, spec)
}

/// Multi-word message: a GRU seeded with the encoded target emits one word
/// per step and reads its own previous word back in.
pub fn recurrent_send(
    g: &mut Graph,
    encoded: NodeId,
    channel: &SenderChannel,
    spec: &ChannelSpec,
    rng: &mut Rng,
    training: bool,
) -> Result<Message> {
    let SenderChannel::Recurrent {
        gru,
        out,
        embed,
        start,
    } = channel
    else {
        return Err(Error::Config(
            "recurrent_send needs a recurrent sender channel".into(),
        ));
    };
    if spec.architecture != Architecture::Recurrent {
        return Err(Error::Config("channel spec is not recurrent".into()));
    }
    let (b, h) = g.value(encoded).dims2()?;
    if h != gru.hidden_dim {
        return Err(Error::dim(
            "recurrent_send",
            format!("encoded width {h}, GRU hidden {}", gru.hidden_dim),
        ));
    }
    let zeros = g.constant(Tensor::zeros(&[b, gru.input_dim]))?;
    let start = g.param(*start);
    let mut input = g.add_row_bias(zeros, start)?;
    let mut state = encoded;
    let mut words = Vec::with_capacity(spec.message_length);
    for step in 0..spec.message_length {
        state = gru.step(g, state, input)?;
        let pre = out.forward(g, state)?;
        let word = emit_word(g, pre, spec, rng, training)?;
        if step + 1 < spec.message_length {
            let embed = embed.as_ref().ok_or_else(|| {
                Error::Config("multi-word message without a word embedding".into())
            })?;
            input = embed.forward(g, word.0)?;
        }
        words.push(word);
    }
    assemble(words, g, spec)
}

pub fn send(
    g: &mut Graph,
    encoded: NodeId,
    channel: &SenderChannel,
    spec: &ChannelSpec,
    rng: &mut Rng,
    training: bool,
) -> Result<Message> {
    match spec.architecture {
        Architecture::Instant => instant_send(g, encoded, channel, spec, rng, training),
        Architecture::Recurrent => recurrent_send(g, encoded, channel, spec, rng, training),
    }
}

/// Receiver-side channel network.
#[derive(Debug, Clone)]
pub enum ReceiverChannel {
    Instant { inp: Linear },
    Recurrent { embed: Linear, gru: GruParams },
}

impl ReceiverChannel {
    pub fn new(params: &mut ParamSet, spec: &ChannelSpec, hidden: usize, embed_dim: usize, rng: &mut Rng) -> Self {
        match spec.architecture {
            Architecture::Instant => ReceiverChannel::Instant {
                inp: Linear::new(params, "receiver.channel.in", spec.word_length, hidden, rng),
            },
            Architecture::Recurrent => ReceiverChannel::Recurrent {
                embed: Linear::new(params, "receiver.channel.embed", spec.word_length, embed_dim, rng),
                gru: GruParams::new(params, "receiver.channel.gru", embed_dim, hidden, rng),
            },
        }
    }
}

/// Decodes a `[b × (message_length·word_length)]` message node into `z [b×h]`.
pub fn receive(g: &mut Graph, message: NodeId, channel: &ReceiverChannel, spec: &ChannelSpec) -> Result<NodeId> {
    let (b, width) = g.value(message).dims2()?;
    if width != spec.message_width() {
        return Err(Error::dim(
            "receive",
            format!("message width {width}, channel expects {}", spec.message_width()),
        ));
    }
    match channel {
        ReceiverChannel::Instant { inp } => inp.forward(g, message),
        ReceiverChannel::Recurrent { embed, gru } => {
            let mut state = g.constant(Tensor::zeros(&[b, gru.hidden_dim]))?;
            for step in 0..spec.message_length {
                let word = if spec.message_length == 1 {
                    message
                } else {
                    g.slice_cols(message, step * spec.word_length, spec.word_length)?
                };
                let e = embed.forward(g, word)?;
                state = gru.step(g, state, e)?;
            }
            Ok(state)
        }
    }
}
