//! Ground-truth-tracked label noise for evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::decode_one_hot;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, floor_count, rng_from_seed, stream, Rng};

/// CIFAR-100 superclasses: 20 groups of 5 fine labels.
pub const CIFAR100_GROUPS_JSON: &str = include_str!("../assets/cifar100_groups.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegime {
    /// Any label may become any other label.
    CompletelyAtRandom,
    /// Labels only move within their class group.
    AtRandom,
}

impl fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseRegime::CompletelyAtRandom => "completely_at_random",
            NoiseRegime::AtRandom => "at_random",
        })
    }
}

/// Which instances were flipped, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub n: usize,
    /// Sorted ascending.
    pub flipped_indices: Vec<usize>,
    pub original_labels: Vec<usize>,
    pub new_labels: Vec<usize>,
    pub mu: f64,
    pub regime: NoiseRegime,
    pub seed: u64,
}

impl NoiseRecord {
    pub fn len(&self) -> usize {
        self.flipped_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped_indices.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::load(format!("noise record: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// A partition of the class indices into disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGroups {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl ClassGroups {
    /// Checks that `groups` covers `0..num_classes` exactly once.
    pub fn new(groups: Vec<Vec<usize>>, num_classes: usize) -> Result<Self> {
        let mut group_of = vec![usize::MAX; num_classes];
        for (g, members) in groups.iter().enumerate() {
            for &c in members {
                if c >= num_classes {
                    return Err(Error::config(format!(
                        "class group {g} names class {c}, but there are only {num_classes} classes"
                    )));
                }
                if group_of[c] != usize::MAX {
                    return Err(Error::config(format!(
                        "class {c} appears in more than one group"
                    )));
                }
                group_of[c] = g;
            }
        }
        if let Some(c) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::config(format!("class {c} is not in any group")));
        }
        Ok(ClassGroups { groups, group_of })
    }

    /// Resolves a `{group: [class names]}` map against the dataset's class
    /// names. Names the dataset does not contain are skipped.
    pub fn from_names(map: &BTreeMap<String, Vec<String>>, class_names: &[String]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut groups = Vec::new();
        let mut missing = 0usize;
        for members in map.values() {
            let resolved: Vec<usize> = members
                .iter()
                .filter_map(|m| {
                    let found = index.get(m.as_str()).copied();
                    missing += usize::from(found.is_none());
                    found
                })
                .collect();
            if !resolved.is_empty() {
                groups.push(resolved);
            }
        }
        if missing > 0 {
            log::warn!(
                "{missing} grouped class names do not occur in the dataset and were ignored"
            );
        }
        Self::new(groups, class_names.len())
    }

    /// Parses a JSON object `{group: [class names]}`.
    pub fn from_json(text: &str, class_names: &[String]) -> Result<Self> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::config(format!("class groups: {e}")))?;
        Self::from_names(&map, class_names)
    }

    pub fn load(path: impl AsRef<Path>, class_names: &[String]) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(
            &std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
            class_names,
        )
    }

    /// The bundled CIFAR-100 superclass grouping.
    pub fn cifar100(class_names: &[String]) -> Result<Self> {
        Self::from_json(CIFAR100_GROUPS_JSON, class_names)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, class: usize) -> usize {
        self.group_of[class]
    }

    pub fn num_classes(&self) -> usize {
        self.group_of.len()
    }
}

fn check_inputs(labels: ArrayView2<'_, f32>, mu: f64) -> Result<usize> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::config(format!("mu must lie in (0, 1), got {mu}")));
    }
    if labels.ncols() < 2 {
        return Err(Error::config("label noise needs at least two classes"));
    }
    let k = floor_count(mu, labels.nrows());
    if k == 0 {
        return Err(Error::config(format!(
            "mu * N = {} rounds down to zero flips; use a larger mu or more instances",
            mu * labels.nrows() as f64
        )));
    }
    Ok(k)
}

/// Draws uniformly from `choices` excluding `source`.
fn draw_other(rng: &mut Rng, choices: &[usize], source: usize) -> usize {
    let pick = rng.random_range(0..choices.len() - 1);
    choices
        .iter()
        .copied()
        .filter(|&c| c != source)
        .nth(pick)
        .expect("source is one of the choices")
}

fn flip(
    labels: ArrayView2<'_, f32>,
    mu: f64,
    seed: u64,
    regime: NoiseRegime,
    k: usize,
    eligible: Vec<usize>,
    targets: impl Fn(usize) -> Vec<usize>,
) -> Result<(Array2<f32>, NoiseRecord)> {
    if eligible.len() < k {
        return Err(Error::config(format!(
            "{k} flips requested but only {} instances are eligible",
            eligible.len()
        )));
    }
    let classes = decode_one_hot(labels);
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::NOISE]));
    let mut chosen: Vec<usize> = sample(&mut rng, eligible.len(), k)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();

    let mut out = labels.to_owned();
    let mut original = Vec::with_capacity(k);
    let mut new = Vec::with_capacity(k);
    for &i in &chosen {
        let from = classes[i];
        let to = draw_other(&mut rng, &targets(from), from);
        out[[i, from]] = 0.0;
        out[[i, to]] = 1.0;
        original.push(from);
        new.push(to);
    }
    let record = NoiseRecord {
        n: labels.nrows(),
        flipped_indices: chosen,
        original_labels: original,
        new_labels: new,
        mu,
        regime,
        seed,
    };
    Ok((out, record))
}

/// Flips `floor(mu * N)` uniformly chosen labels to a uniformly chosen
/// different class.
pub fn flip_completely_at_random(
    labels: ArrayView2<'_, f32>,
    mu: f64,
    seed: u64,
) -> Result<(Array2<f32>, NoiseRecord)> {
    let k = check_inputs(labels, mu)?;
    let all: Vec<usize> = (0..labels.ncols()).collect();
    flip(
        labels,
        mu,
        seed,
        NoiseRegime::CompletelyAtRandom,
        k,
        (0..labels.nrows()).collect(),
        |_| all.clone(),
    )
}

/// Like [`flip_completely_at_random`], but each new label is drawn from the
/// other members of the original label's group. Instances whose class is
/// alone in its group are never selected.
pub fn flip_at_random(
    labels: ArrayView2<'_, f32>,
    mu: f64,
    groups: &ClassGroups,
    seed: u64,
) -> Result<(Array2<f32>, NoiseRecord)> {
    let k = check_inputs(labels, mu)?;
    if groups.num_classes() != labels.ncols() {
        return Err(Error::config(format!(
            "class groups cover {} classes, labels have {}",
            groups.num_classes(),
            labels.ncols()
        )));
    }
    let classes = decode_one_hot(labels);
    let eligible: Vec<usize> = (0..classes.len())
        .filter(|&i| groups.groups[groups.group_of(classes[i])].len() >= 2)
        .collect();
    flip(labels, mu, seed, NoiseRegime::AtRandom, k, eligible, |c| {
        groups.groups[groups.group_of(c)].clone()
    })
}
