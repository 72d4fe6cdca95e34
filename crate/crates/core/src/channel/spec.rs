use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Continuous,
    GumbelSoftmax,
    Quantized,
}

impl Mode {
    /// Short tag used in result tables.
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Continuous => "CN",
            Mode::GumbelSoftmax => "GS",
            Mode::Quantized => "QT",
        }
    }

    pub fn is_discrete(self) -> bool {
        !matches!(self, Mode::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Instant,
    Recurrent,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Instant => "Inst",
            Architecture::Recurrent => "RNN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizeRegime {
    /// Quantize in the forward pass during training (straight-through
    /// backward) and at inference.
    TrainAndInfer,
    /// Train on the continuous message, quantize only at inference.
    InferOnly,
}

impl fmt::Display for QuantizeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantizeRegime::TrainAndInfer => "train_and_infer",
            QuantizeRegime::InferOnly => "infer_only",
        })
    }
}

/// How the alphabet size maps to the quantization grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerScheme {
    /// `S = 1/(v-1)`, symbols `0..=v-1`: exactly `v` levels on `[0, 1]`.
    Levels,
    /// `S = 1/v`, symbols `0..=v`: the literal range-over-alphabet scale,
    /// which yields `v + 1` levels under round-to-nearest.
    Paper,
}

fn default_message_length() -> usize {
    1
}
fn default_regime() -> QuantizeRegime {
    QuantizeRegime::InferOnly
}
fn default_scheme() -> QuantizerScheme {
    QuantizerScheme::Levels
}
fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub mode: Mode,
    /// Required for quantized and Gumbel-softmax modes.
    #[serde(default)]
    pub alphabet_size: Option<usize>,
    pub word_length: usize,
    #[serde(default = "default_message_length")]
    pub message_length: usize,
    pub architecture: Architecture,
    #[serde(default = "default_regime")]
    pub quantize_regime: QuantizeRegime,
    #[serde(default = "default_scheme")]
    pub quantizer_scheme: QuantizerScheme,
    #[serde(default = "default_temperature")]
    pub gs_temperature: f64,
    #[serde(default)]
    pub gs_straight_through: bool,
}

impl ChannelSpec {
    pub fn continuous(architecture: Architecture, word_length: usize, message_length: usize) -> Self {
        ChannelSpec {
            mode: Mode::Continuous,
            alphabet_size: None,
            word_length,
            message_length,
            architecture,
            quantize_regime: default_regime(),
            quantizer_scheme: default_scheme(),
            gs_temperature: default_temperature(),
            gs_straight_through: false,
        }
    }

    pub fn quantized(
        architecture: Architecture,
        alphabet_size: usize,
        word_length: usize,
        message_length: usize,
        regime: QuantizeRegime,
    ) -> Self {
        ChannelSpec {
            mode: Mode::Quantized,
            alphabet_size: Some(alphabet_size),
            quantize_regime: regime,
            ..Self::continuous(architecture, word_length, message_length)
        }
    }

    /// Gumbel-softmax words are one-hot, so the word length equals the
    /// alphabet size.
    pub fn gumbel(architecture: Architecture, alphabet_size: usize, message_length: usize) -> Self {
        ChannelSpec {
            mode: Mode::GumbelSoftmax,
            alphabet_size: Some(alphabet_size),
            ..Self::continuous(architecture, alphabet_size, message_length)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_length == 0 || self.message_length == 0 {
            return Err(Error::Config(
                "word_length and message_length must be positive".into(),
            ));
        }
        if self.architecture == Architecture::Instant && self.message_length != 1 {
            return Err(Error::Config(format!(
                "instant channel sends single-word messages, got message_length {}",
                self.message_length
            )));
        }
        match self.mode {
            Mode::Continuous => {}
            Mode::Quantized => {
                let v = self.alphabet()?;
                if v < 2 {
                    return Err(Error::Config(format!(
                        "quantized alphabet needs at least 2 symbols, got {v}"
                    )));
                }
            }
            Mode::GumbelSoftmax => {
                let v = self.alphabet()?;
                if v < 2 {
                    return Err(Error::Config(format!(
                        "Gumbel-softmax alphabet needs at least 2 symbols, got {v}"
                    )));
                }
                if v != self.word_length {
                    return Err(Error::Config(format!(
                        "Gumbel-softmax words are one-hot: word_length {} must equal alphabet_size {v}",
                        self.word_length
                    )));
                }
                if !(self.gs_temperature > 0.0) {
                    return Err(Error::Config(format!(
                        "Gumbel-softmax temperature must be positive, got {}",
                        self.gs_temperature
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Result<usize> {
        self.alphabet_size.ok_or_else(|| {
            Error::Config(format!("{:?} mode requires alphabet_size", self.mode))
        })
    }

    /// Values per message row: `message_length * word_length`.
    pub fn message_width(&self) -> usize {
        self.message_length * self.word_length
    }

    /// Number of distinct words the channel can carry, `None` for continuous.
    pub fn word_capacity(&self) -> Option<Capacity> {
        match self.mode {
            Mode::Continuous => None,
            Mode::Quantized => {
                let v = self.alphabet_size?;
                let levels = match self.quantizer_scheme {
                    QuantizerScheme::Levels => v,
                    QuantizerScheme::Paper => v + 1,
                };
                Some(capacity(levels as u64, self.word_length as u64))
            }
            Mode::GumbelSoftmax => Some(capacity(self.alphabet_size? as u64, 1)),
        }
    }

    /// Distinct whole messages: word capacity raised to the message length.
    pub fn message_capacity(&self) -> Option<Capacity> {
        self.word_capacity()
            .map(|c| c.pow(self.message_length as u64))
    }

    /// Short label such as `QT-Inst`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.mode.tag(), self.architecture.tag())
    }
}

/// Grid spacing of the uniform quantizer on `[0, 1]`.
pub fn scaling_factor(scheme: QuantizerScheme, alphabet_size: usize) -> Result<f64> {
    if alphabet_size < 2 {
        return Err(Error::Config(format!(
            "scaling factor needs an alphabet of at least 2, got {alphabet_size}"
        )));
    }
    // beta = 1, alpha = 0
    Ok(match scheme {
        QuantizerScheme::Levels => 1.0 / (alphabet_size - 1) as f64,
        QuantizerScheme::Paper => 1.0 / alphabet_size as f64,
    })
}

/// `base^exponent`, kept symbolic once it no longer fits in 63 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Exact(u64),
    Overflow { base: u64, exponent: u64 },
}

pub fn capacity(base: u64, exponent: u64) -> Capacity {
    let mut acc: u64 = 1;
    for _ in 0..exponent {
        match acc.checked_mul(base) {
            Some(v) if v <= i64::MAX as u64 => acc = v,
            _ => return Capacity::Overflow { base, exponent },
        }
        if base <= 1 {
            break;
        }
    }
    Capacity::Exact(acc)
}

impl Capacity {
    pub fn pow(self, k: u64) -> Capacity {
        match self {
            Capacity::Exact(b) => capacity(b, k),
            Capacity::Overflow { base, exponent } => Capacity::Overflow {
                base,
                exponent: exponent.saturating_mul(k),
            },
        }
    }

    /// `log10` of the capacity, for comparisons across both forms.
    pub fn log10(self) -> f64 {
        match self {
            Capacity::Exact(v) => (v as f64).log10(),
            Capacity::Overflow { base, exponent } => exponent as f64 * (base as f64).log10(),
        }
    }

    pub fn exact(self) -> Option<u64> {
        match self {
            Capacity::Exact(v) => Some(v),
            Capacity::Overflow { .. } => None,
        }
    }

    /// `min(self, n)` as an integer.
    pub fn min_with(self, n: u64) -> u64 {
        match self {
            Capacity::Exact(v) => v.min(n),
            Capacity::Overflow { .. } => n,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Exact(v) => write!(f, "{v}"),
            Capacity::Overflow { base, exponent } => write!(f, "{base}^{exponent}"),
        }
    }
}
