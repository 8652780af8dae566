//! Pairwise training examples for the preference classifier.

use std::collections::BTreeSet;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::seed;

/// Order relation between the left and right instance of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    /// left target > right target
    Greater,
    /// left target < right target
    Less,
}

impl Label {
    pub fn from_targets(left: f64, right: f64) -> Option<Label> {
        if left > right {
            Some(Label::Greater)
        } else if left < right {
            Some(Label::Less)
        } else {
            None
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Greater => 1.0,
            Label::Less => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Greater => Label::Less,
            Label::Less => Label::Greater,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Greater
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub left_id: usize,
    pub right_id: usize,
    /// `[f_left, f_right]`
    pub features: Vec<f64>,
    pub label: Label,
}

impl PairExample {
    pub fn new(left: &Instance, right: &Instance) -> Option<PairExample> {
        let label = Label::from_targets(left.target, right.target)?;
        let mut features = Vec::with_capacity(left.features.len() * 2);
        features.extend_from_slice(&left.features);
        features.extend_from_slice(&right.features);
        Some(PairExample {
            left_id: left.id,
            right_id: right.id,
            features,
            label,
        })
    }

    /// The same pair seen from the other side.
    pub fn swapped(&self) -> PairExample {
        let d = self.features.len() / 2;
        let mut features = self.features[d..].to_vec();
        features.extend_from_slice(&self.features[..d]);
        PairExample {
            left_id: self.right_id,
            right_id: self.left_id,
            features,
            label: self.label.flipped(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PairingPolicy {
    Full,
    /// Each instance is compared with its `k` rank neighbours plus
    /// `n_s - k` randomly chosen non-neighbours.
    Sampled { n_s: usize, k: usize },
}

impl PairingPolicy {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            PairingPolicy::Full => Ok(()),
            PairingPolicy::Sampled { n_s, k } => {
                if k > n_s {
                    Err(Error::invalid(format!("k = {k} exceeds n_s = {n_s}")))
                } else if n_s >= n {
                    Err(Error::invalid(format!(
                        "n_s = {n_s} must be below the training size {n}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn build(&self, train: &Dataset, seed: u64) -> Result<Vec<PairExample>> {
        match self {
            PairingPolicy::Full => build_full_pairs(train),
            PairingPolicy::Sampled { .. } => build_sampled_pairs(train, self, seed),
        }
    }
}

/// Every unordered pair with distinct targets, oriented by dataset position
/// (earlier instance on the left).
pub fn build_full_pairs(train: &Dataset) -> Result<Vec<PairExample>> {
    let inst = &train.instances;
    let pairs: Vec<PairExample> = (0..inst.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            inst[i + 1..]
                .iter()
                .filter_map(move |right| PairExample::new(&inst[i], right))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(pairs)
}

/// Rank-neighbour plus random pairing. Neighbours are taken in target-rank
/// order (ties broken by dataset position): `ceil(k/2)` above and `floor(k/2)`
/// below, truncated at the ends. Unordered pairs are deduplicated and
/// oriented by dataset position as in [`build_full_pairs`].
pub fn build_sampled_pairs(
    train: &Dataset,
    policy: &PairingPolicy,
    seed: u64,
) -> Result<Vec<PairExample>> {
    let (n_s, k) = match *policy {
        PairingPolicy::Sampled { n_s, k } => (n_s, k),
        PairingPolicy::Full => return build_full_pairs(train),
    };
    let n = train.len();
    policy.validate(n)?;
    let inst = &train.instances;

    let mut by_rank: Vec<usize> = (0..n).collect();
    by_rank.sort_by(|&a, &b| inst[a].target.total_cmp(&inst[b].target).then(a.cmp(&b)));
    let mut rank_of = vec![0; n];
    for (r, &p) in by_rank.iter().enumerate() {
        rank_of[p] = r;
    }

    let above = k.div_ceil(2);
    let below = k / 2;
    let partners: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let r = rank_of[p];
            let lo = r.saturating_sub(below);
            let hi = (r + above).min(n - 1);
            let mut out: Vec<usize> = (lo..=hi).filter(|&q| q != r).map(|q| by_rank[q]).collect();

            // non-neighbours are the ranks outside [lo, hi]
            let pool = n - (hi - lo + 1);
            let draws = (n_s - k).min(pool);
            let mut rng = seed::rng(seed, "pairs", p as u64);
            for j in index::sample(&mut rng, pool, draws).into_iter() {
                let q = if j < lo { j } else { j + (hi - lo + 1) };
                out.push(by_rank[q]);
            }
            out
        })
        .collect();

    let mut unique = BTreeSet::new();
    for (p, others) in partners.iter().enumerate() {
        for &q in others {
            unique.insert((p.min(q), p.max(q)));
        }
    }
    let pairs: Vec<PairExample> = unique
        .into_iter()
        .filter_map(|(a, b)| PairExample::new(&inst[a], &inst[b]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(pairs)
}
