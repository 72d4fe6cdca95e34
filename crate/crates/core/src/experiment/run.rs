use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState};
use crate::agents::{
    decode_targets, encode_candidates, game_loss, pairwise_scores, receiver_forward, sender_forward, Agents,
    Candidates,
};
use crate::channel::{argmax, Mode};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{Rng, STREAM_CANDIDATES, STREAM_CLASSES, STREAM_GUMBEL, STREAM_INIT, STREAM_SHUFFLE, STREAM_SPLIT};
use crate::tensor::Tensor;
use crate::world::{build_candidates, encode_classes, make_class_map, make_split, ClassMap, ObjectWorld, Phase, Split};

use super::config::{ExperimentConfig, Game};

/// World, split and encodings shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub struct GameData {
    pub game: Game,
    pub world: ObjectWorld,
    pub split: Split,
    pub class_map: Option<ClassMap>,
    /// `[N×d]`, one row per object.
    pub sender_inputs: Tensor,
    /// `[P×d_r]`, one row per pool item (object or class).
    pub pool_encodings: Tensor,
}

impl GameData {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let world = cfg.world()?;
        let seed = cfg.world.data_seed;
        let pool = cfg.pool_size()?;
        let split = make_split(world.len(), pool, cfg.world.split_fractions, &mut Rng::new(seed, STREAM_SPLIT))?;
        let sender_inputs = world.encode_all();
        let (class_map, pool_encodings) = match cfg.game {
            Game::ObjectReferential => (None, sender_inputs.clone()),
            Game::ObjectClassification => {
                let k = cfg.num_classes();
                let map = make_class_map(&world, cfg.world.class_scheme, k, &mut Rng::new(seed, STREAM_CLASSES))?;
                let classes: Vec<usize> = (0..k).collect();
                (Some(map), encode_classes(&classes, k))
            }
        };
        Ok(GameData {
            game: cfg.game,
            world,
            split,
            class_map,
            sender_inputs,
            pool_encodings,
        })
    }

    pub fn pool_size(&self) -> usize {
        self.split.candidate_pool.len()
    }

    /// The pool item the receiver must find for a sender target.
    pub fn receiver_target(&self, object: usize) -> usize {
        match &self.class_map {
            None => object,
            Some(m) => m.label(object),
        }
    }

    pub fn sender_batch(&self, objects: &[usize]) -> Tensor {
        gather_rows(&self.sender_inputs, objects)
    }
}

fn gather_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let d = t.shape()[1];
    let mut data = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        data.extend_from_slice(t.row(r));
    }
    Tensor::new(vec![rows.len(), d], data).expect("gather shape")
}

/// Fresh agents for `seed`.
pub fn init_agents(cfg: &ExperimentConfig, seed: u64) -> Result<Agents> {
    Agents::with_init(&cfg.channel, cfg.dims()?, cfg.agents.init, &mut Rng::new(seed, STREAM_INIT))
}

/// Accuracy of each candidate count plus NoUM over one set of targets.
#[derive(Debug)]
pub struct Evaluation {
    pub accuracy: Vec<(usize, Result<f64>)>,
    pub noum: Result<usize>,
}

/// Scores every target against the whole pool once, then builds one episode
/// per target for each `n` and reads its logits from the pooled scores.
pub fn evaluate_targets(
    agents: &Agents,
    data: &GameData,
    targets: &[usize],
    counts: &[usize],
    rng_for: impl Fn(usize) -> Rng,
) -> Result<Evaluation> {
    let decoded = decode_targets(agents, &data.sender_batch(targets))?;
    let u = encode_candidates(agents, &data.pool_encodings)?;
    let scores = pairwise_scores(&decoded.z, &u)?;
    let pool = &data.split.candidate_pool;
    let mut accuracy = Vec::with_capacity(counts.len());
    for &n in counts {
        let mut rng = rng_for(n);
        let acc = (|| {
            let mut hits = 0usize;
            let mut logits = Vec::with_capacity(n);
            for (i, &t) in targets.iter().enumerate() {
                let (cands, pos) = build_candidates(data.receiver_target(t), pool, n, &mut rng)?;
                let row = scores.row(i);
                logits.clear();
                logits.extend(cands.iter().map(|&c| row[c]));
                if argmax(&logits) == pos {
                    hits += 1;
                }
            }
            Ok(hits as f64 / targets.len() as f64)
        })();
        accuracy.push((n, acc));
    }
    let noum = match (&decoded.symbols, agents.spec.mode) {
        (_, Mode::Continuous) => Err(Error::Unsupported("NoUM for continuous messages".into())),
        (Some(sym), _) => Ok(count_unique(&sym.data, sym.message_length * sym.word_length)),
        (None, _) => Err(Error::Contract("discrete inference produced no symbols".into())),
    };
    Ok(Evaluation { accuracy, noum })
}

fn count_unique(symbols: &[u32], width: usize) -> usize {
    symbols.chunks(width).collect::<HashSet<_>>().len()
}

/// Distinct inference messages over the test targets.
pub fn noum(agents: &Agents, data: &GameData) -> Result<usize> {
    if agents.spec.mode == Mode::Continuous {
        return Err(Error::Unsupported("NoUM for continuous messages".into()));
    }
    let decoded = decode_targets(agents, &data.sender_batch(&data.split.test))?;
    let sym = decoded
        .symbols
        .ok_or_else(|| Error::Contract("discrete inference produced no symbols".into()))?;
    Ok(count_unique(&sym.data, sym.message_length * sym.word_length))
}

fn eval_rng(seed: u64, phase: &str, n: usize) -> Rng {
    Rng::new(seed, STREAM_CANDIDATES).fork(&format!("{phase}-n{n}"))
}

/// Progress record emitted after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub agents: Agents,
    /// 0 means the initial parameters were never beaten.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Index 0 is the untrained probe, index `e` is epoch `e`.
    pub validation_accuracy: Vec<f64>,
    /// Mean loss of epoch `e + 1` at index `e`.
    pub train_loss: Vec<f64>,
}

pub fn validation_accuracy(agents: &Agents, data: &GameData, n: usize, seed: u64) -> Result<f64> {
    let eval = evaluate_targets(agents, data, &data.split.valid, &[n], |n| eval_rng(seed, "valid", n))?;
    eval.accuracy.into_iter().next().expect("one count").1
}

/// Trains one seed with early stopping on the validation probe.
pub fn train(
    cfg: &ExperimentConfig,
    data: &GameData,
    seed: u64,
    on_epoch: &dyn Fn(&EpochLog),
) -> Result<TrainOutcome> {
    let t = &cfg.trainer;
    let negatives = t.train_negatives.unwrap_or(data.pool_size() - 1);
    let probe = t.probe_candidates.unwrap_or(data.pool_size());
    let mut agents = init_agents(cfg, seed)?;
    let mut adam = AdamState::new(&agents.params, AdamConfig::with_lr(t.learning_rate));
    let mut gumbel = Rng::new(seed, STREAM_GUMBEL);
    let mut shuffle = Rng::new(seed, STREAM_SHUFFLE);
    let mut cand_rng = Rng::new(seed, STREAM_CANDIDATES).fork("train");

    let initial = validation_accuracy(&agents, data, probe, seed)?;
    let mut curve = vec![initial];
    let mut losses = Vec::new();
    let mut best = (initial, 0usize, agents.params.clone());
    let mut since_best = 0;
    let mut order = data.split.train.clone();
    let full_pool = negatives + 1 == data.pool_size();
    let mut epochs_run = 0;

    for epoch in 1..=t.epochs {
        shuffle.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for batch in order.chunks(t.batch_size) {
            let targets = data.sender_batch(batch);
            let mut g = Graph::new(&agents.params);
            let msg = sender_forward(&mut g, &agents, &targets, &mut gumbel, true)?;
            let (logits, positions) = if full_pool {
                let positions: Vec<usize> = batch.iter().map(|&o| data.receiver_target(o)).collect();
                let l = receiver_forward(
                    &mut g,
                    &agents,
                    msg.node,
                    Candidates::Shared {
                        encodings: &data.pool_encodings,
                    },
                )?;
                (l, positions)
            } else {
                let mut rows = Vec::with_capacity(batch.len() * (negatives + 1));
                let mut positions = Vec::with_capacity(batch.len());
                for &o in batch {
                    let (c, p) =
                        build_candidates(data.receiver_target(o), &data.split.candidate_pool, negatives + 1, &mut cand_rng)?;
                    rows.extend(c);
                    positions.push(p);
                }
                let enc = gather_rows(&data.pool_encodings, &rows);
                let l = receiver_forward(
                    &mut g,
                    &agents,
                    msg.node,
                    Candidates::PerRow {
                        encodings: &enc,
                        n: negatives + 1,
                    },
                )?;
                (l, positions)
            };
            let loss = game_loss(&mut g, logits, &positions)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch} (seed {seed})")));
            }
            loss_sum += value;
            steps += 1;
            let grads = g.backward(loss)?;
            drop(g);
            adam.update(&mut agents.params, grads)?;
        }
        let val = validation_accuracy(&agents, data, probe, seed)?;
        let mean_loss = loss_sum / steps.max(1) as f64;
        curve.push(val);
        losses.push(mean_loss);
        epochs_run = epoch;
        on_epoch(&EpochLog {
            seed,
            epoch,
            train_loss: mean_loss,
            validation_accuracy: val,
        });
        if val > best.0 {
            best = (val, epoch, agents.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= t.patience {
                break;
            }
        }
    }
    agents.params = best.2;
    Ok(TrainOutcome {
        agents,
        best_epoch: best.1,
        epochs_run,
        validation_accuracy: curve,
        train_loss: losses,
    })
}

/// Test-set accuracy for one candidate count; `error` is set instead of
/// `accuracy` when the count could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub results: Vec<CountResult>,
    /// Absent for continuous messages.
    pub noum: Option<usize>,
    pub num_test_targets: usize,
}

/// One episode per test target for every candidate count, plus NoUM.
pub fn evaluate(agents: &Agents, data: &GameData, counts: &[usize], seed: u64) -> Result<TestReport> {
    let eval = evaluate_targets(agents, data, &data.split.test, counts, |n| eval_rng(seed, "test", n))?;
    let results = eval
        .accuracy
        .into_iter()
        .map(|(n, r)| match r {
            Ok(a) => CountResult {
                n,
                accuracy: Some(a),
                error: None,
            },
            Err(e) => CountResult {
                n,
                accuracy: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let noum = match eval.noum {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TestReport {
        results,
        noum,
        num_test_targets: data.split.test.len(),
    })
}

/// Fraction of `episodes` won by agents that were never trained. Each
/// episode draws its own initialization, target and candidates, so outcomes
/// are independent Bernoulli trials.
pub fn untrained_accuracy(cfg: &ExperimentConfig, data: &GameData, n: usize, episodes: usize, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed, STREAM_CANDIDATES).fork(&format!("untrained-n{n}"));
    let targets = &data.split.test;
    let mut hits = 0;
    for e in 0..episodes {
        let agents = Agents::with_init(
            &cfg.channel,
            cfg.dims()?,
            cfg.agents.init,
            &mut Rng::new(seed, STREAM_INIT).fork(&format!("untrained-{e}")),
        )?;
        let target = targets[rng.below(targets.len())];
        let (cands, pos) = build_candidates(data.receiver_target(target), &data.split.candidate_pool, n, &mut rng)?;
        let decoded = decode_targets(&agents, &data.sender_batch(&[target]))?;
        let u = encode_candidates(&agents, &gather_rows(&data.pool_encodings, &cands))?;
        let s = pairwise_scores(&decoded.z, &u)?;
        if argmax(s.data()) == pos {
            hits += 1;
        }
    }
    Ok(hits as f64 / episodes as f64)
}

/// Targets for a phase, for callers that want to probe other splits.
pub fn phase_targets(data: &GameData, phase: Phase) -> &[usize] {
    data.split.targets(phase)
}
