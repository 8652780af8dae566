//! Placement of a query on the target axis by pairwise voting.
//!
//! The `m` distinct training targets `u_1 < ... < u_m` cut the axis into
//! `m + 1` regions: `R_0 = (-inf, u_1)`, `R_j = (u_j, u_{j+1})` and
//! `R_m = (u_m, inf)`. A training instance sitting at edge `u_e` that is
//! judged greater than the query supports every region below `u_e` and
//! opposes every region above it; a "less" verdict does the reverse. The
//! region with the largest tally is the maximum-likelihood placement.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict_pair, PreferenceLearner, PreferenceModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pairs::{Label, PairingPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    edges: Vec<f64>,
    edge_instances: Vec<Vec<usize>>,
    edge_of: HashMap<usize, usize>,
}

impl BinPartition {
    /// Partition from `(instance id, target)` pairs.
    pub fn new(items: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut items: Vec<(usize, f64)> = items.into_iter().collect();
        if let Some(&(id, _)) = items.iter().find(|(_, t)| !t.is_finite()) {
            return Err(Error::invalid(format!("instance {id} has non-finite target")));
        }
        items.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut edges: Vec<f64> = Vec::new();
        let mut edge_instances: Vec<Vec<usize>> = Vec::new();
        let mut edge_of = HashMap::with_capacity(items.len());
        for (id, t) in items {
            if edges.last() != Some(&t) {
                edges.push(t);
                edge_instances.push(Vec::new());
            }
            let e = edges.len() - 1;
            edge_instances[e].push(id);
            if edge_of.insert(id, e).is_some() {
                return Err(Error::invalid(format!("duplicate instance id {id}")));
            }
        }
        if edges.len() < 2 {
            return Err(Error::TooFewDistinctTargets(edges.len()));
        }
        Ok(Self {
            edges,
            edge_instances,
            edge_of,
        })
    }

    pub fn from_dataset(train: &Dataset) -> Result<Self> {
        Self::new(train.instances.iter().map(|i| (i.id, i.target)))
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Ids of the training instances whose target equals `edges()[e]`.
    pub fn edge_instances(&self, e: usize) -> &[usize] {
        &self.edge_instances[e]
    }

    pub fn edge_of(&self, id: usize) -> Option<usize> {
        self.edge_of.get(&id).copied()
    }

    pub fn n_regions(&self) -> usize {
        self.edges.len() + 1
    }

    /// Bounds of region `j`; `None` for the open ends.
    pub fn region_bounds(&self, j: usize) -> (Option<f64>, Option<f64>) {
        let m = self.edges.len();
        let lower = (j > 0).then(|| self.edges[j - 1]);
        let upper = (j < m).then(|| self.edges[j]);
        (lower, upper)
    }

    /// Midpoint of region `j`, clamped to the outer edges for `R_0` and `R_m`.
    pub fn region_value(&self, j: usize) -> f64 {
        match self.region_bounds(j) {
            (Some(lo), Some(hi)) => lo + (hi - lo) / 2.0,
            (None, Some(hi)) => hi,
            (Some(lo), None) => lo,
            (None, None) => unreachable!("partition has at least two edges"),
        }
    }

    /// Region strictly containing `t`, or `None` when `t` is an edge.
    pub fn region_containing(&self, t: f64) -> Option<usize> {
        match self.edges.binary_search_by(|e| e.total_cmp(&t)) {
            Ok(_) => None,
            Err(j) => Some(j),
        }
    }
}

/// Training targets indexed by position; ids are positions.
pub fn build_partition(train_targets: &[f64]) -> Result<BinPartition> {
    BinPartition::new(train_targets.iter().copied().enumerate())
}

/// One training instance's opinion about the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: usize,
    /// `Greater` means the training instance's target exceeds the query's.
    pub label: Label,
    /// Probability of `Greater`.
    pub prob_greater: f64,
}

impl Verdict {
    pub fn from_label(id: usize, label: Label) -> Verdict {
        Verdict {
            id,
            label,
            prob_greater: if label.is_positive() { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// +1 / -1 per side of the voter's edge.
    #[default]
    Plain,
    /// Probability mass spread evenly over the regions on each side.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub votes: Vec<f64>,
}

/// Accumulates the verdicts into one tally per region.
///
/// Verdicts are processed in id order so floating-point sums do not depend on
/// the caller's ordering.
pub fn vote(partition: &BinPartition, verdicts: &[Verdict], mode: VoteMode) -> Result<VoteTally> {
    if verdicts.is_empty() {
        return Err(Error::EmptyInput("no verdicts to tally"));
    }
    let m = partition.edges.len();
    let mut order: Vec<&Verdict> = verdicts.iter().collect();
    order.sort_by_key(|v| v.id);

    // diff[j] holds votes[j] - votes[j - 1]
    let mut diff = vec![0.0; m + 2];
    for v in order {
        let e = partition.edge_of(v.id).ok_or(Error::UnknownInstance(v.id))?;
        // regions 0..=e lie below the voter's edge, e+1..=m above it
        let (below, above) = match mode {
            VoteMode::Plain => {
                let s = v.label.sign();
                (s, -s)
            }
            VoteMode::Weighted => {
                if !(0.0..=1.0).contains(&v.prob_greater) {
                    return Err(Error::invalid(format!(
                        "probability {} for instance {} outside [0, 1]",
                        v.prob_greater, v.id
                    )));
                }
                (
                    v.prob_greater / (e + 1) as f64,
                    (1.0 - v.prob_greater) / (m - e) as f64,
                )
            }
        };
        diff[0] += below;
        diff[e + 1] += above - below;
        diff[m + 1] -= above;
    }
    let votes = diff[..=m]
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    Ok(VoteTally { votes })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Mean of the (clamped) values of all maximal regions.
    #[default]
    AverageMidpoints,
    /// The lowest maximal region.
    Lowest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Lowest region attaining the maximum tally.
    pub region: usize,
    /// Every region attaining the maximum, ascending.
    pub tied_regions: Vec<usize>,
    pub predicted_value: f64,
    pub tally: VoteTally,
    /// Bounds of `region`; `None` at the open ends.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Picks the winning region and converts it to a value.
pub fn place(tally: &VoteTally, partition: &BinPartition, tie_rule: TieRule) -> Result<Placement> {
    if tally.votes.len() != partition.n_regions() {
        return Err(Error::invalid(format!(
            "tally has {} regions, partition has {}",
            tally.votes.len(),
            partition.n_regions()
        )));
    }
    let max = tally.votes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = tally.votes.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale;
    let tied_regions: Vec<usize> = (0..tally.votes.len())
        .filter(|&j| tally.votes[j] >= max - tol)
        .collect();
    let region = tied_regions[0];
    let predicted_value = match tie_rule {
        TieRule::Lowest => partition.region_value(region),
        TieRule::AverageMidpoints => {
            tied_regions
                .iter()
                .map(|&j| partition.region_value(j))
                .sum::<f64>()
                / tied_regions.len() as f64
        }
    };
    let (lower, upper) = partition.region_bounds(region);
    Ok(Placement {
        region,
        tied_regions,
        predicted_value,
        tally: tally.clone(),
        lower,
        upper,
    })
}

/// Verdicts of every training instance against the query features.
pub fn verdicts(model: &dyn PreferenceModel, train: &Dataset, q: &[f64]) -> Result<Vec<Verdict>> {
    train
        .instances
        .par_iter()
        .map(|inst| {
            let (label, prob_greater) = predict_pair(model, &inst.features, q)?;
            Ok(Verdict {
                id: inst.id,
                label,
                prob_greater,
            })
        })
        .collect()
}

/// Full stage-two prediction: classify `[f_i, q]` for every training
/// instance, tally and place.
pub fn predict(model: &dyn PreferenceModel, train: &Dataset, q: &[f64], mode: VoteMode) -> Result<Placement> {
    let partition = BinPartition::from_dataset(train)?;
    let tally = vote(&partition, &verdicts(model, train, q)?, mode)?;
    place(&tally, &partition, TieRule::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextInstance {
    pub id: usize,
    pub target: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub target: f64,
    pub instances: Vec<ContextInstance>,
}

/// Why a query landed where it did: the training instances at the winning
/// region's edges and the nearest-ranked instances on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub region: usize,
    pub predicted_value: f64,
    pub tally: Vec<f64>,
    /// `None` when the region is open below.
    pub lower_bracket: Option<Bracket>,
    /// `None` when the region is open above.
    pub upper_bracket: Option<Bracket>,
    /// Up to `top_n` instances at or below the lower edge, nearest first.
    pub below: Vec<ContextInstance>,
    /// Up to `top_n` instances at or above the upper edge, nearest first.
    pub above: Vec<ContextInstance>,
}

pub fn explain(placement: &Placement, train: &Dataset, top_n: usize) -> Explanation {
    let context = |i: &crate::data::Instance| ContextInstance {
        id: i.id,
        target: i.target,
        features: i.features.clone(),
    };
    let mut ranked: Vec<&crate::data::Instance> = train.instances.iter().collect();
    ranked.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.id.cmp(&b.id)));

    let bracket = |edge: Option<f64>| {
        edge.map(|t| Bracket {
            target: t,
            instances: ranked.iter().filter(|i| i.target == t).map(|i| context(i)).collect(),
        })
    };
    let below = match placement.lower {
        Some(lo) => ranked
            .iter()
            .rev()
            .filter(|i| i.target <= lo)
            .take(top_n)
            .map(|i| context(i))
            .collect(),
        None => Vec::new(),
    };
    let above = match placement.upper {
        Some(hi) => ranked
            .iter()
            .filter(|i| i.target >= hi)
            .take(top_n)
            .map(|i| context(i))
            .collect(),
        None => Vec::new(),
    };
    Explanation {
        region: placement.region,
        predicted_value: placement.predicted_value,
        tally: placement.tally.votes.clone(),
        lower_bracket: bracket(placement.lower),
        upper_bracket: bracket(placement.upper),
        below,
        above,
    }
}

/// Configuration of the two-stage estimator.
#[derive(Debug, Clone)]
pub struct L2pConfig {
    pub learner: Arc<dyn PreferenceLearner>,
    pub pairing: PairingPolicy,
    pub vote_mode: VoteMode,
    pub tie_rule: TieRule,
}

impl Default for L2pConfig {
    fn default() -> Self {
        Self {
            learner: Arc::new(crate::classifier::ForestConfig::default()),
            pairing: PairingPolicy::Full,
            vote_mode: VoteMode::Plain,
            tie_rule: TieRule::AverageMidpoints,
        }
    }
}

/// A fitted estimator: preference model plus the training set it votes with.
#[derive(Debug)]
pub struct L2pModel {
    model: Box<dyn PreferenceModel>,
    train: Dataset,
    partition: BinPartition,
    vote_mode: VoteMode,
    tie_rule: TieRule,
    n_pairs: usize,
}

impl L2pModel {
    pub fn fit(config: &L2pConfig, train: &Dataset, seed: u64) -> Result<Self> {
        let partition = BinPartition::from_dataset(train)?;
        let pairs = config.pairing.build(train, crate::seed::derive(seed, "pairing", 0))?;
        let model = config
            .learner
            .train(&pairs, crate::seed::derive(seed, "classifier", 0))?;
        Ok(Self {
            model,
            train: train.clone(),
            partition,
            vote_mode: config.vote_mode,
            tie_rule: config.tie_rule,
            n_pairs: pairs.len(),
        })
    }

    /// Wraps an already trained preference model.
    pub fn from_model(
        model: Box<dyn PreferenceModel>,
        train: &Dataset,
        vote_mode: VoteMode,
        tie_rule: TieRule,
    ) -> Result<Self> {
        if model.input_dim() != 2 * train.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * train.dim(),
                found: model.input_dim(),
            });
        }
        Ok(Self {
            partition: BinPartition::from_dataset(train)?,
            model,
            train: train.clone(),
            vote_mode,
            tie_rule,
            n_pairs: 0,
        })
    }

    pub fn place(&self, q: &[f64]) -> Result<Placement> {
        let v = verdicts(self.model.as_ref(), &self.train, q)?;
        let tally = vote(&self.partition, &v, self.vote_mode)?;
        place(&tally, &self.partition, self.tie_rule)
    }

    pub fn explain(&self, placement: &Placement, top_n: usize) -> Explanation {
        explain(placement, &self.train, top_n)
    }

    /// Number of pairs the classifier was trained on (0 for wrapped models).
    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn partition(&self) -> &BinPartition {
        &self.partition
    }

    pub fn preference_model(&self) -> &dyn PreferenceModel {
        self.model.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(partition: &BinPartition, targets: &[f64], q: f64) -> Vec<Verdict> {
        targets
            .iter()
            .enumerate()
            .filter_map(|(id, &t)| Label::from_targets(t, q).map(|l| Verdict::from_label(id, l)))
            .inspect(|v| assert!(partition.edge_of(v.id).is_some()))
            .collect()
    }

    #[test]
    fn partition_construction() {
        let p = build_partition(&[1.0, 5.0, 10.0]).unwrap();
        assert_eq!(p.edges(), &[1.0, 5.0, 10.0]);
        assert_eq!(p.n_regions(), 4);
        let p = build_partition(&[5.0, 5.0, 5.0, 7.0]).unwrap();
        assert_eq!(p.edges(), &[5.0, 7.0]);
        assert_eq!(p.n_regions(), 3);
        assert_eq!(p.edge_instances(0), &[0, 1, 2]);
        assert!(matches!(
            build_partition(&[3.0]),
            Err(Error::TooFewDistinctTargets(1))
        ));
    }

    #[test]
    fn hand_trace() {
        let targets = [1.0, 5.0, 10.0];
        let p = build_partition(&targets).unwrap();
        let tally = vote(&p, &oracle(&p, &targets, 3.0), VoteMode::Plain).unwrap();
        assert_eq!(tally.votes, vec![1.0, 3.0, 1.0, -1.0]);
        let placed = place(&tally, &p, TieRule::default()).unwrap();
        assert_eq!(placed.region, 1);
        assert_eq!(placed.predicted_value, 3.0);
        assert_eq!((placed.lower, placed.upper), (Some(1.0), Some(5.0)));
    }

    #[test]
    fn clamping_and_ties() {
        let p = build_partition(&[1.0, 5.0, 10.0]).unwrap();
        let top = VoteTally {
            votes: vec![-3.0, -1.0, 1.0, 3.0],
        };
        assert_eq!(place(&top, &p, TieRule::default()).unwrap().predicted_value, 10.0);
        let bottom = VoteTally {
            votes: vec![3.0, 1.0, -1.0, -3.0],
        };
        assert_eq!(place(&bottom, &p, TieRule::default()).unwrap().predicted_value, 1.0);
        let tied = VoteTally {
            votes: vec![0.0, 2.0, 2.0, 0.0],
        };
        let placed = place(&tied, &p, TieRule::AverageMidpoints).unwrap();
        assert_eq!(placed.predicted_value, 5.25);
        assert_eq!(placed.tied_regions, vec![1, 2]);
        assert_eq!(place(&tied, &p, TieRule::Lowest).unwrap().predicted_value, 3.0);
        assert!(place(&VoteTally { votes: vec![1.0] }, &p, TieRule::default()).is_err());
    }

    #[test]
    fn unanimous_less_votes_top_region() {
        let targets = [1.0, 5.0, 10.0, 10.0];
        let p = build_partition(&targets).unwrap();
        let v: Vec<Verdict> = (0..4).map(|id| Verdict::from_label(id, Label::Less)).collect();
        let tally = vote(&p, &v, VoteMode::Plain).unwrap();
        assert_eq!(tally.votes[3], 4.0);
        assert!(tally.votes[..3].iter().all(|&x| x < 4.0));
    }

    #[test]
    fn weighted_half_probabilities() {
        // each voter at 1-based edge e adds 0.5/e below and 0.5/(4-e) above
        let p = build_partition(&[1.0, 5.0, 10.0]).unwrap();
        let v: Vec<Verdict> = (0..3)
            .map(|id| Verdict {
                id,
                label: Label::Greater,
                prob_greater: 0.5,
            })
            .collect();
        let tally = vote(&p, &v, VoteMode::Weighted).unwrap();
        let expected = [
            0.5 + 0.25 + 0.5 / 3.0,
            0.5 / 3.0 + 0.25 + 0.5 / 3.0,
            0.5 / 3.0 + 0.25 + 0.5 / 3.0,
            0.5 / 3.0 + 0.25 + 0.5,
        ];
        for (a, b) in tally.votes.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((tally.votes[0] - tally.votes[3]).abs() < 1e-12);
    }

    #[test]
    fn vote_errors() {
        let p = build_partition(&[1.0, 5.0]).unwrap();
        assert!(matches!(
            vote(&p, &[Verdict::from_label(9, Label::Less)], VoteMode::Plain),
            Err(Error::UnknownInstance(9))
        ));
        assert!(vote(&p, &[], VoteMode::Plain).is_err());
    }

    #[test]
    fn explain_brackets() {
        let train = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1.0, 5.0, 10.0],
        )
        .unwrap();
        let p = BinPartition::from_dataset(&train).unwrap();
        let tally = vote(&p, &oracle(&p, &train.targets(), 3.0), VoteMode::Plain).unwrap();
        let placed = place(&tally, &p, TieRule::default()).unwrap();
        let ex = explain(&placed, &train, 1);
        assert_eq!(ex.lower_bracket.as_ref().unwrap().instances[0].target, 1.0);
        assert_eq!(ex.upper_bracket.as_ref().unwrap().instances[0].target, 5.0);

        let tally = vote(&p, &oracle(&p, &train.targets(), 0.5), VoteMode::Plain).unwrap();
        let placed = place(&tally, &p, TieRule::default()).unwrap();
        assert_eq!(placed.region, 0);
        let ex = explain(&placed, &train, 1);
        assert!(ex.lower_bracket.is_none());
        assert!(ex.below.is_empty());
    }
}
