use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentDims, InitScheme};
use crate::channel::{Architecture, ChannelSpec, Mode, QuantizeRegime};
use crate::error::{Error, Result};
use crate::world::{build_world, ClassScheme, ObjectWorld};

pub const SCHEMA_VERSION: u32 = 1;

/// Candidate counts reported for the full Object world.
pub const OBJECT_CANDIDATE_COUNTS: [usize; 8] = [2, 10, 100, 500, 1000, 2000, 5000, 10_000];

/// Hidden width of recurrent agents unless configured.
pub const DEFAULT_RECURRENT_HIDDEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Game {
    ObjectReferential,
    ObjectClassification,
}

impl Game {
    pub fn tag(self) -> &'static str {
        match self {
            Game::ObjectReferential => "object_referential",
            Game::ObjectClassification => "object_classification",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    #[serde(default = "default_attributes")]
    pub num_attributes: usize,
    #[serde(default = "default_values")]
    pub values_per_attribute: usize,
    #[serde(default = "default_fractions")]
    pub split_fractions: [f64; 3],
    /// Seeds the split and class map, shared by every training seed.
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
    #[serde(default = "default_class_scheme")]
    pub class_scheme: ClassScheme,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

fn default_attributes() -> usize {
    4
}
fn default_values() -> usize {
    10
}
fn default_fractions() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}
fn default_data_seed() -> u64 {
    1
}
fn default_class_scheme() -> ClassScheme {
    ClassScheme::FirstAttribute
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            num_attributes: default_attributes(),
            values_per_attribute: default_values(),
            split_fractions: default_fractions(),
            data_seed: default_data_seed(),
            class_scheme: default_class_scheme(),
            num_classes: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Encoder and channel hidden width. Defaults to the word length for
    /// Instant channels and 1024 for Recurrent ones.
    #[serde(default)]
    pub hidden: Option<usize>,
    /// Recurrent word-embedding width. Defaults to `hidden`.
    #[serde(default)]
    pub embed: Option<usize>,
    #[serde(default)]
    pub init: InitScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_epochs")]
    pub patience: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Negatives per training target. Defaults to the whole pool minus the target.
    #[serde(default)]
    pub train_negatives: Option<usize>,
    /// Candidate count for the per-epoch validation probe. Defaults to the pool size.
    #[serde(default)]
    pub probe_candidates: Option<usize>,
}

fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    1e-5
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: default_epochs(),
            patience: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            train_negatives: None,
            probe_candidates: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub candidate_counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_alphabets")]
    pub alphabet_sizes: Vec<usize>,
    #[serde(default = "default_word_lengths")]
    pub word_lengths: Vec<usize>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<QuantizeRegime>,
}

fn default_alphabets() -> Vec<usize> {
    vec![2, 4, 6, 8, 10]
}
fn default_word_lengths() -> Vec<usize> {
    vec![1, 2, 5, 10, 25, 50, 100]
}
fn default_regimes() -> Vec<QuantizeRegime> {
    vec![QuantizeRegime::InferOnly]
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphabet_sizes: default_alphabets(),
            word_lengths: default_word_lengths(),
            regimes: default_regimes(),
        }
    }
}

/// Experiment description as stored on disk (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub game: Game,
    #[serde(default)]
    pub world: WorldConfig,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub agents: AgentConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Minimal config with every default in place.
    pub fn new(game: Game, channel: ChannelSpec) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            name: None,
            game,
            world: WorldConfig::default(),
            channel,
            agents: AgentConfig::default(),
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
            seeds: default_seeds(),
            output_dir: None,
            sweep: None,
        }
    }

    pub fn world(&self) -> Result<ObjectWorld> {
        build_world(self.world.num_attributes, self.world.values_per_attribute)
    }

    /// Number of classes in the classification game.
    pub fn num_classes(&self) -> usize {
        self.world.num_classes.unwrap_or(self.world.values_per_attribute)
    }

    /// Size of the receiver's candidate pool.
    pub fn pool_size(&self) -> Result<usize> {
        Ok(match self.game {
            Game::ObjectReferential => self.world()?.len(),
            Game::ObjectClassification => self.num_classes(),
        })
    }

    pub fn dims(&self) -> Result<AgentDims> {
        let world = self.world()?;
        let hidden = self.agents.hidden.unwrap_or(match self.channel.architecture {
            Architecture::Instant => self.channel.word_length,
            Architecture::Recurrent => DEFAULT_RECURRENT_HIDDEN,
        });
        Ok(AgentDims {
            sender_input: world.encoding_dim(),
            receiver_input: match self.game {
                Game::ObjectReferential => world.encoding_dim(),
                Game::ObjectClassification => self.num_classes(),
            },
            hidden,
            embed: self.agents.embed.unwrap_or(hidden),
        })
    }

    /// Fills every optional field with its effective value and validates the
    /// whole config. The result is what reports echo.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.channel.validate()?;
        // only for its validation of the attribute counts
        c.world()?;
        if c.game == Game::ObjectClassification {
            c.world.num_classes = Some(c.num_classes());
        }
        let pool = c.pool_size()?;
        let dims = c.dims()?;
        c.agents.hidden = Some(dims.hidden);
        c.agents.embed = Some(dims.embed);
        let t = &mut c.trainer;
        if t.batch_size == 0 || t.patience == 0 {
            return Err(Error::Config("batch_size and patience must be positive".into()));
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", t.learning_rate)));
        }
        let negatives = *t.train_negatives.get_or_insert(pool - 1);
        if negatives == 0 || negatives >= pool {
            return Err(Error::Config(format!(
                "train_negatives {negatives} must be in 1..{pool}"
            )));
        }
        let probe = *t.probe_candidates.get_or_insert(pool);
        if probe < 1 || probe > pool {
            return Err(Error::Config(format!("probe_candidates {probe} must be in 1..={pool}")));
        }
        if c.eval.candidate_counts.is_none() {
            let mut counts: Vec<usize> = match c.game {
                Game::ObjectReferential => OBJECT_CANDIDATE_COUNTS.to_vec(),
                Game::ObjectClassification => vec![2, 10],
            };
            counts.retain(|&n| n < pool);
            counts.push(pool);
            c.eval.candidate_counts = Some(counts);
        }
        if c.eval.candidate_counts.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
            return Err(Error::Config("candidate_counts must be nonempty and positive".into()));
        }
        if c.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(s) = &c.sweep {
            if s.alphabet_sizes.is_empty() || s.word_lengths.is_empty() || s.regimes.is_empty() {
                return Err(Error::Config("sweep grid must be nonempty".into()));
            }
            if c.channel.mode != Mode::Quantized {
                return Err(Error::Config("sweeps vary the quantized channel; set channel.mode = quantized".into()));
            }
        }
        if c.world.split_fractions.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::Config("split fractions exceed 1".into()));
        }
        Ok(c)
    }

    /// Short run identifier such as `QT-Inst_v10_w100_m1_infer_only`.
    pub fn run_label(&self) -> String {
        let ch = &self.channel;
        let mut s = format!("{}-{}", ch.mode.tag(), ch.architecture.tag());
        if let Some(v) = ch.alphabet_size {
            s.push_str(&format!("_v{v}"));
        }
        s.push_str(&format!("_w{}_m{}", ch.word_length, ch.message_length));
        if ch.mode == Mode::Quantized {
            s.push_str(&format!("_{}", ch.quantize_regime));
        }
        s
    }

    /// Switches to the full 4-attribute, 10-value world.
    pub fn full_scale(&mut self) {
        self.world.num_attributes = 4;
        self.world.values_per_attribute = 10;
        if self.game == Game::ObjectClassification && self.world.class_scheme == ClassScheme::FirstAttribute {
            self.world.num_classes = None;
        }
        self.eval.candidate_counts = None;
        self.trainer.train_negatives = None;
        self.trainer.probe_candidates = None;
    }
}
