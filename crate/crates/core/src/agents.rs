//! Sender and receiver agents, candidate scoring, the game loss and
//! parameter checkpoints.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{receive, send, ChannelSpec, Message, MessageBatch, ReceiverChannel, SenderChannel, Symbols};
use crate::error::{Error, Result};
use crate::graph::{softmax_rows, Graph, NodeId};
use crate::layers::Linear;
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::{gemm, Tensor};

/// Layer widths for a sender/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDims {
    /// Width of what the sender sees (object encoding).
    pub sender_input: usize,
    /// Width of each receiver candidate (object or class encoding).
    pub receiver_input: usize,
    pub hidden: usize,
    /// Word embedding width for recurrent channels.
    pub embed: usize,
}

/// Weight initialization for a fresh pair of agents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Glorot-uniform weights, zero biases.
    #[default]
    GlorotUniform,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for linear weights and biases and
    /// `U(-1/sqrt(H), 1/sqrt(H))` for every GRU tensor, as in PyTorch.
    TorchDefault,
}

/// Redraws every tensor of `params` under the PyTorch default rules, keyed
/// by the `.weight`/`.bias`/`.w_ih`/`.w_hh`/`.b_ih`/`.b_hh` name suffixes.
/// Other tensors (the start-of-message vector) keep their values.
pub fn torch_default_init(params: &mut ParamSet, rng: &mut Rng) {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let name = params.name(id).to_string();
        let bound_from = |weight: &str, params: &ParamSet| {
            params
                .find(weight)
                .map(|w| 1.0 / (params.get(w).shape()[1] as f64).sqrt())
        };
        let bound = if name.ends_with(".weight") {
            Some(1.0 / (params.get(id).shape()[1] as f64).sqrt())
        } else if let Some(stem) = name.strip_suffix(".bias") {
            bound_from(&format!("{stem}.weight"), params)
        } else if let Some(stem) = [".w_ih", ".w_hh", ".b_ih", ".b_hh"]
            .iter()
            .find_map(|suffix| name.strip_suffix(suffix))
        {
            bound_from(&format!("{stem}.w_hh"), params)
        } else {
            None
        };
        if let Some(b) = bound {
            for v in params.get_mut(id).data_mut() {
                *v = rng.uniform_range(-b, b);
            }
        }
    }
}

/// Both agents' parameters and layer handles.
#[derive(Debug, Clone)]
pub struct Agents {
    pub params: ParamSet,
    pub spec: ChannelSpec,
    pub dims: AgentDims,
    pub sender_encoder: Linear,
    pub sender_channel: SenderChannel,
    pub receiver_channel: ReceiverChannel,
    pub receiver_encoder: Linear,
}

impl Agents {
    pub fn new(spec: &ChannelSpec, dims: AgentDims, rng: &mut Rng) -> Result<Self> {
        Self::with_init(spec, dims, InitScheme::GlorotUniform, rng)
    }

    pub fn with_init(spec: &ChannelSpec, dims: AgentDims, init: InitScheme, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        if dims.sender_input == 0 || dims.receiver_input == 0 || dims.hidden == 0 || dims.embed == 0 {
            return Err(Error::Config(format!("agent widths must be positive: {dims:?}")));
        }
        let mut params = ParamSet::new();
        let sender_encoder = Linear::new(&mut params, "sender.encoder", dims.sender_input, dims.hidden, rng);
        let sender_channel = SenderChannel::new(&mut params, spec, dims.hidden, dims.embed, rng);
        let receiver_channel = ReceiverChannel::new(&mut params, spec, dims.hidden, dims.embed, rng);
        let receiver_encoder = Linear::new(&mut params, "receiver.encoder", dims.receiver_input, dims.hidden, rng);
        if init == InitScheme::TorchDefault {
            torch_default_init(&mut params, rng);
        }
        Ok(Agents {
            params,
            spec: spec.clone(),
            dims,
            sender_encoder,
            sender_channel,
            receiver_channel,
            receiver_encoder,
        })
    }
}

/// Encodes targets `[b×d]` and sends them over the channel.
pub fn sender_forward(
    g: &mut Graph,
    agents: &Agents,
    targets: &Tensor,
    rng: &mut Rng,
    training: bool,
) -> Result<Message> {
    let (_, d) = targets.dims2()?;
    if d != agents.dims.sender_input {
        return Err(Error::dim(
            "sender_forward",
            format!("target width {d}, sender expects {}", agents.dims.sender_input),
        ));
    }
    let x = g.constant(targets.clone())?;
    let u = agents.sender_encoder.forward(g, x)?;
    send(g, u, &agents.sender_channel, &agents.spec, rng, training)
}

/// Candidate encodings for a batch of `b` rows.
#[derive(Debug, Clone, Copy)]
pub enum Candidates<'a> {
    /// `[(b·n) × d]`, row `i·n + j` is candidate `j` of batch row `i`.
    PerRow { encodings: &'a Tensor, n: usize },
    /// `[N × d]`, one candidate list shared by every batch row.
    Shared { encodings: &'a Tensor },
}

/// Decodes the message and scores every candidate, returning logits `[b×n]`.
pub fn receiver_forward(g: &mut Graph, agents: &Agents, message: NodeId, candidates: Candidates) -> Result<NodeId> {
    let z = receive(g, message, &agents.receiver_channel, &agents.spec)?;
    let (b, h) = g.value(z).dims2()?;
    let enc = agents.receiver_encoder;
    match candidates {
        Candidates::PerRow { encodings, n } => {
            let (rows, d) = encodings.dims2()?;
            if rows != b * n || d != enc.in_dim {
                return Err(Error::dim(
                    "receiver_forward",
                    format!("candidates [{rows}×{d}], expected [{}×{}]", b * n, enc.in_dim),
                ));
            }
            let x = g.constant(encodings.clone())?;
            let u = enc.forward(g, x)?;
            g.row_dot(z, u)
        }
        Candidates::Shared { encodings } => {
            let (_, d) = encodings.dims2()?;
            if d != enc.in_dim {
                return Err(Error::dim(
                    "receiver_forward",
                    format!("candidate width {d}, encoder expects {}", enc.in_dim),
                ));
            }
            // z·(XWᵀ + b)ᵀ = (zW)Xᵀ + z·b, which avoids encoding every candidate.
            let w = g.param(enc.weight);
            let bias = g.param(enc.bias);
            let x = g.constant(encodings.clone())?;
            let zw = g.matmul(z, w)?;
            let scores = g.matmul_t(zw, x, false, true)?;
            let bias = g.reshape(bias, &[h, 1])?;
            let zb = g.matmul(z, bias)?;
            g.add_column(scores, zb)
        }
    }
}

/// Mean cross-entropy of the logits against the target positions.
pub fn game_loss(g: &mut Graph, logits: NodeId, target_positions: &[usize]) -> Result<NodeId> {
    g.softmax_cross_entropy(logits, target_positions)
}

/// Detached receiver scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch {
    pub logits: Tensor,
    pub predicted: Vec<usize>,
    pub probabilities: Tensor,
}

impl ScoreBatch {
    pub fn from_logits(logits: Tensor) -> Result<Self> {
        let (_, n) = logits.dims2()?;
        let predicted = logits.data().chunks(n).map(crate::channel::argmax).collect();
        let probabilities = Tensor::new(logits.shape().to_vec(), softmax_rows(logits.data(), n))?;
        Ok(ScoreBatch {
            logits,
            predicted,
            probabilities,
        })
    }

    pub fn accuracy(&self, target_positions: &[usize]) -> f64 {
        let hits = self
            .predicted
            .iter()
            .zip(target_positions)
            .filter(|(p, t)| p == t)
            .count();
        hits as f64 / self.predicted.len().max(1) as f64
    }
}

/// Scores a detached message batch against `[b×n×d]` candidate encodings.
pub fn score_candidates(agents: &Agents, message: &MessageBatch, candidates: &Tensor) -> Result<ScoreBatch> {
    let s = candidates.shape();
    if s.len() != 3 || s[0] != message.batch_size() {
        return Err(Error::dim(
            "score_candidates",
            format!("candidates {s:?} for {} messages", message.batch_size()),
        ));
    }
    let n = s[1];
    let flat = candidates.clone().reshape(&[s[0] * n, s[2]])?;
    let mut g = Graph::inference(&agents.params);
    let m = message.to_node(&mut g)?;
    let logits = receiver_forward(
        &mut g,
        agents,
        m,
        Candidates::PerRow {
            encodings: &flat,
            n,
        },
    )?;
    ScoreBatch::from_logits(g.value(logits).clone())
}

/// Inference-time view of a batch of targets: the receiver's decoded
/// `z [b×h]` plus the discrete message symbols when the mode has them.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub z: Tensor,
    pub symbols: Option<Symbols>,
}

/// Runs sender and receiver channel at inference on `targets [b×d]`.
pub fn decode_targets(agents: &Agents, targets: &Tensor) -> Result<Decoded> {
    let mut g = Graph::inference(&agents.params);
    // Inference never samples; the stream is only here to satisfy the signature.
    let mut unused = Rng::new(0, crate::rng::STREAM_GUMBEL);
    let msg = sender_forward(&mut g, agents, targets, &mut unused, false)?;
    let z = receive(&mut g, msg.node, &agents.receiver_channel, &agents.spec)?;
    Ok(Decoded {
        z: g.value(z).clone(),
        symbols: msg.symbols,
    })
}

/// Receiver encodings of candidates `[N×d]`, giving `[N×h]`.
pub fn encode_candidates(agents: &Agents, encodings: &Tensor) -> Result<Tensor> {
    let mut g = Graph::inference(&agents.params);
    let x = g.constant(encodings.clone())?;
    let u = agents.receiver_encoder.forward(&mut g, x)?;
    Ok(g.value(u).clone())
}

/// All pairwise scores `z · uᵀ`, `[b×h]` by `[N×h]` giving `[b×N]`.
pub fn pairwise_scores(z: &Tensor, u: &Tensor) -> Result<Tensor> {
    let (b, h) = z.dims2()?;
    let (n, h2) = u.dims2()?;
    if h != h2 {
        return Err(Error::dim("pairwise_scores", format!("{h} vs {h2}")));
    }
    let mut out = vec![0.0; b * n];
    gemm(b, h, n, z.data(), false, u.data(), true, 0.0, &mut out);
    Tensor::new(vec![b, n], out)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"QCOMMCK1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    tensors: Vec<CheckpointEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointEntry {
    name: String,
    shape: Vec<usize>,
}

/// Writes `params` as: 8-byte magic, u64 LE header length, JSON header
/// listing each tensor's name and shape, then every value as f64 LE.
pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        tensors: params
            .iter()
            .map(|(_, p)| CheckpointEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * params.total_values());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, p) in params.iter() {
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Checkpoint(format!("{}: {what}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let mut offset = 16 + hlen;
    let mut params = ParamSet::new();
    for entry in header.tensors {
        let count: usize = entry.shape.iter().product();
        let raw = bytes
            .get(offset..offset + 8 * count)
            .ok_or_else(|| bad(&format!("truncated data for {}", entry.name)))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += 8 * count;
        params.add(entry.name, Tensor::new(entry.shape, data)?);
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(params)
}
