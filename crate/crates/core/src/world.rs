//! The synthetic Object world, data splits and episode sampling.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Largest world `build_world` accepts unless told otherwise.
pub const DEFAULT_MAX_OBJECTS: usize = 1 << 20;

/// Every tuple of `num_attributes` values drawn from a shared set of
/// `values_per_attribute` values, enumerated lexicographically with
/// attribute 0 most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectWorld {
    pub num_attributes: usize,
    pub values_per_attribute: usize,
    count: usize,
}

pub fn build_world(num_attributes: usize, values_per_attribute: usize) -> Result<ObjectWorld> {
    build_world_capped(num_attributes, values_per_attribute, DEFAULT_MAX_OBJECTS)
}

pub fn build_world_capped(num_attributes: usize, values_per_attribute: usize, max_objects: usize) -> Result<ObjectWorld> {
    if num_attributes == 0 || values_per_attribute == 0 {
        return Err(Error::Config(
            "worlds need at least one attribute and one value".into(),
        ));
    }
    let mut count: usize = 1;
    for _ in 0..num_attributes {
        count = count
            .checked_mul(values_per_attribute)
            .filter(|&c| c <= max_objects)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{values_per_attribute}^{num_attributes} objects exceeds the maximum of {max_objects}"
                ))
            })?;
    }
    Ok(ObjectWorld {
        num_attributes,
        values_per_attribute,
        count,
    })
}

impl ObjectWorld {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Length of the concatenated one-hot encoding.
    pub fn encoding_dim(&self) -> usize {
        self.num_attributes * self.values_per_attribute
    }

    pub fn attributes(&self, object: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_attributes];
        let mut rest = object;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.values_per_attribute;
            rest /= self.values_per_attribute;
        }
        out
    }

    pub fn encode_into(&self, object: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, value) in self.attributes(object).into_iter().enumerate() {
            out[a * self.values_per_attribute + value] = 1.0;
        }
    }

    /// Encodings of `objects`, one row each.
    pub fn encode(&self, objects: &[usize]) -> Tensor {
        let d = self.encoding_dim();
        let mut data = vec![0.0; objects.len() * d];
        for (row, &o) in data.chunks_mut(d).zip(objects) {
            self.encode_into(o, row);
        }
        Tensor::new(vec![objects.len(), d], data).expect("encoding shape")
    }

    pub fn encode_all(&self) -> Tensor {
        let all: Vec<usize> = (0..self.count).collect();
        self.encode(&all)
    }
}

/// One-hot rows of width `num_classes` for the given labels.
pub fn encode_classes(labels: &[usize], num_classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (row, &l) in data.chunks_mut(num_classes).zip(labels) {
        row[l] = 1.0;
    }
    Tensor::new(vec![labels.len(), num_classes], data).expect("class encoding shape")
}

/// Disjoint target lists plus the receiver's candidate pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub candidate_pool: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Valid,
    Test,
}

/// Partitions a seeded permutation of `num_targets` target indices by
/// `fractions` (train, valid, test). The candidate pool is `0..pool_size`.
pub fn make_split(num_targets: usize, pool_size: usize, fractions: [f64; 3], rng: &mut Rng) -> Result<Split> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let n_train = (num_targets as f64 * fractions[0]).round() as usize;
    let n_valid = (num_targets as f64 * fractions[1]).round() as usize;
    if n_train == 0 || n_valid == 0 || n_train + n_valid >= num_targets {
        return Err(Error::Config(format!(
            "splitting {num_targets} targets by {fractions:?} leaves an empty split"
        )));
    }
    let mut order: Vec<usize> = (0..num_targets).collect();
    rng.shuffle(&mut order);
    let test = order.split_off(n_train + n_valid);
    let valid = order.split_off(n_train);
    Ok(Split {
        train: order,
        valid,
        test,
        candidate_pool: (0..pool_size).collect(),
    })
}

impl Split {
    pub fn targets(&self, phase: Phase) -> &[usize] {
        match phase {
            Phase::Train => &self.train,
            Phase::Valid => &self.valid,
            Phase::Test => &self.test,
        }
    }

    /// Writes `train.txt`, `valid.txt` and `test.txt` (one index per line).
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, list) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            let mut s = String::with_capacity(list.len() * 6);
            for idx in list {
                writeln!(s, "{idx}").expect("string write");
            }
            let path = dir.join(format!("{name}.txt"));
            std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// One game turn. `sender_target` is what the sender sees; `target` is the
/// receiver-side item to find among `candidates` (the same object in the
/// referential game, its class in the classification game).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub sender_target: usize,
    pub target: usize,
    pub candidates: Vec<usize>,
    pub target_position: usize,
}

impl Episode {
    pub fn distractors(&self) -> impl Iterator<Item = usize> + '_ {
        self.candidates
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.target_position)
            .map(|(_, &c)| c)
    }
}

/// `n` candidates from `pool`: `target` plus `n - 1` distinct distractors
/// drawn uniformly without replacement, with the target placed at a uniform
/// random position.
pub fn build_candidates(target: usize, pool: &[usize], n: usize, rng: &mut Rng) -> Result<(Vec<usize>, usize)> {
    let tpos = pool.iter().position(|&p| p == target).ok_or_else(|| {
        Error::Contract(format!("target {target} is not in the candidate pool"))
    })?;
    if n == 0 || n - 1 > pool.len() - 1 {
        return Err(Error::Contract(format!(
            "{n} candidates requested from a pool of {}",
            pool.len()
        )));
    }
    let picks = rng.choice(pool.len() - 1, n - 1, true)?;
    let mut candidates: Vec<usize> = picks
        .into_iter()
        .map(|k| pool[if k < tpos { k } else { k + 1 }])
        .collect();
    let position = rng.below(n);
    candidates.insert(position, target);
    Ok((candidates, position))
}

/// Referential episode with a uniformly drawn target from the phase's list.
pub fn sample_episode(split: &Split, phase: Phase, n: usize, rng: &mut Rng) -> Result<Episode> {
    let targets = split.targets(phase);
    if targets.is_empty() {
        return Err(Error::Contract(format!("no {phase:?} targets")));
    }
    let target = targets[rng.below(targets.len())];
    referential_episode(target, &split.candidate_pool, n, rng)
}

pub fn referential_episode(target: usize, pool: &[usize], n: usize, rng: &mut Rng) -> Result<Episode> {
    let (candidates, target_position) = build_candidates(target, pool, n, rng)?;
    Ok(Episode {
        sender_target: target,
        target,
        candidates,
        target_position,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScheme {
    /// Label is the value of attribute 0, so `K = values_per_attribute`.
    FirstAttribute,
    /// Uniform random label per object.
    SeededRandom,
}

/// Many-to-one map from objects to class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

pub fn make_class_map(world: &ObjectWorld, scheme: ClassScheme, num_classes: usize, rng: &mut Rng) -> Result<ClassMap> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "classification needs at least 2 classes, got {num_classes}"
        )));
    }
    match scheme {
        ClassScheme::FirstAttribute => {
            if num_classes != world.values_per_attribute {
                return Err(Error::Config(format!(
                    "first_attribute classes require K = {} (values per attribute), got {num_classes}",
                    world.values_per_attribute
                )));
            }
            let labels = (0..world.len()).map(|o| world.attributes(o)[0]).collect();
            Ok(ClassMap {
                labels,
                num_classes,
            })
        }
        ClassScheme::SeededRandom => {
            if num_classes > world.len() {
                return Err(Error::Config(format!(
                    "{num_classes} classes for {} objects",
                    world.len()
                )));
            }
            // redraw until every label is used
            for attempt in 0..1000 {
                let mut r = if attempt == 0 {
                    rng.clone()
                } else {
                    rng.fork(&format!("retry-{attempt}"))
                };
                let labels: Vec<usize> = (0..world.len()).map(|_| r.below(num_classes)).collect();
                let mut seen = vec![false; num_classes];
                labels.iter().for_each(|&l| seen[l] = true);
                if seen.iter().all(|&s| s) {
                    *rng = r;
                    return Ok(ClassMap {
                        labels,
                        num_classes,
                    });
                }
            }
            Err(Error::Config(format!(
                "could not cover {num_classes} classes with {} objects",
                world.len()
            )))
        }
    }
}

impl ClassMap {
    pub fn label(&self, object: usize) -> usize {
        self.labels[object]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }
}

/// Classification episode: the sender sees an object, the receiver picks
/// its class among `n` class labels.
pub fn classification_episode(
    split: &Split,
    class_map: &ClassMap,
    n: usize,
    rng: &mut Rng,
    phase: Phase,
) -> Result<Episode> {
    if n > class_map.num_classes {
        return Err(Error::Contract(format!(
            "{n} candidates but only {} classes",
            class_map.num_classes
        )));
    }
    let targets = split.targets(phase);
    if targets.is_empty() {
        return Err(Error::Contract(format!("no {phase:?} targets")));
    }
    let object = targets[rng.below(targets.len())];
    classification_episode_for(object, class_map, n, rng)
}

pub fn classification_episode_for(object: usize, class_map: &ClassMap, n: usize, rng: &mut Rng) -> Result<Episode> {
    if n > class_map.num_classes {
        return Err(Error::Contract(format!(
            "{n} candidates but only {} classes",
            class_map.num_classes
        )));
    }
    let classes: Vec<usize> = (0..class_map.num_classes).collect();
    let label = class_map.label(object);
    let (candidates, target_position) = build_candidates(label, &classes, n, rng)?;
    Ok(Episode {
        sender_target: object,
        target: label,
        candidates,
        target_position,
    })
}
