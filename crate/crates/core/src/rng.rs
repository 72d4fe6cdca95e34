//! Seeded random streams.
//!
//! Every consumer draws from its own named stream derived from the run seed,
//! so extra draws in one stream never shift another. The generator is
//! ChaCha8, which is counter based and gives identical sequences on every
//! platform.

use std::collections::HashSet;

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const STREAM_INIT: &str = "init";
pub const STREAM_SPLIT: &str = "data-split";
pub const STREAM_CANDIDATES: &str = "candidate-sampling";
pub const STREAM_GUMBEL: &str = "gumbel-noise";
pub const STREAM_SHUFFLE: &str = "epoch-shuffle";
pub const STREAM_CLASSES: &str = "class-map";

#[derive(Debug, Clone)]
pub struct Rng {
    label: String,
    seed: u64,
    inner: ChaCha8Rng,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64, stream: &str) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed ^ fnv1a(stream.as_bytes()).rotate_left(17);
        for chunk in key.chunks_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(fnv1a(stream.as_bytes()));
        Rng {
            label: stream.to_string(),
            seed,
            inner,
        }
    }

    /// Independent child stream, e.g. one per evaluation worker.
    pub fn fork(&self, suffix: &str) -> Rng {
        Rng::new(self.seed, &format!("{}/{suffix}", self.label))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn uniform_tensor(&mut self, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.uniform()).collect();
        Tensor::new(shape.to_vec(), data).expect("shape product matches")
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` indices from `[0, n)`, distinct when `without_replacement` is set.
    pub fn choice(&mut self, n: usize, k: usize, without_replacement: bool) -> Result<Vec<usize>> {
        if !without_replacement {
            if n == 0 && k > 0 {
                return Err(Error::Contract("choice from an empty range".into()));
            }
            return Ok((0..k).map(|_| self.below(n)).collect());
        }
        if k > n {
            return Err(Error::Contract(format!(
                "cannot choose {k} distinct items out of {n}"
            )));
        }
        if k * 4 >= n {
            // partial Fisher-Yates
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = i + self.below(n - i);
                pool.swap(i, j);
            }
            pool.truncate(k);
            return Ok(pool);
        }
        let mut seen = HashSet::with_capacity(k * 2);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let x = self.below(n);
            if seen.insert(x) {
                out.push(x);
            }
        }
        Ok(out)
    }
}
