//! Pairwise preference classifiers.
//!
//! [`PreferenceModel`] is the interface the placement stage consumes; the
//! default implementation is a CART random forest with Gini splits, written
//! here so its split rules and leaf semantics are fully specified.

use std::fmt::Debug;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::{Label, PairExample};
use crate::seed;

/// A trained pairwise classifier over concatenated features `[f_i, f_j]`.
pub trait PreferenceModel: Send + Sync + Debug {
    /// Length of the concatenated input, `2 * d`.
    fn input_dim(&self) -> usize;

    /// Probability that the left instance's target exceeds the right one's.
    fn predict_prob(&self, x: &[f64]) -> f64;

    /// `Greater` iff `predict_prob(x) >= 0.5`.
    fn predict_label(&self, x: &[f64]) -> Label {
        label_for(self.predict_prob(x))
    }
}

/// Something that can turn pairs into a [`PreferenceModel`].
pub trait PreferenceLearner: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn train(&self, pairs: &[PairExample], seed: u64) -> Result<Box<dyn PreferenceModel>>;
}

pub fn label_for(prob: f64) -> Label {
    if prob >= 0.5 {
        Label::Greater
    } else {
        Label::Less
    }
}

/// Classifies the pair `[f_i, f_q]`.
pub fn predict_pair(model: &dyn PreferenceModel, f_i: &[f64], f_q: &[f64]) -> Result<(Label, f64)> {
    let mut x = Vec::with_capacity(f_i.len() + f_q.len());
    x.extend_from_slice(f_i);
    x.extend_from_slice(f_q);
    if f_i.len() != f_q.len() || x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    let p = model.predict_prob(&x);
    Ok((label_for(p), p))
}

/// Fraction of pairs whose predicted label matches the stored label.
pub fn classifier_accuracy(model: &dyn PreferenceModel, pairs: &[PairExample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("accuracy over zero pairs"));
    }
    let mut hits = 0usize;
    for p in pairs {
        if p.features.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                found: p.features.len(),
            });
        }
        if model.predict_label(&p.features) == p.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features examined per split; `None` means `ceil(sqrt(input_dim))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    fn resolved_max_features(&self, input_dim: usize) -> Result<usize> {
        let m = self
            .max_features
            .unwrap_or_else(|| (input_dim as f64).sqrt().ceil() as usize);
        if m == 0 || m > input_dim {
            return Err(Error::invalid(format!(
                "max_features = {m} outside [1, {input_dim}]"
            )));
        }
        Ok(m)
    }
}

impl PreferenceLearner for ForestConfig {
    fn name(&self) -> &'static str {
        "random_forest"
    }

    fn train(&self, pairs: &[PairExample], seed: u64) -> Result<Box<dyn PreferenceModel>> {
        Ok(Box::new(train_forest(pairs, self, seed)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Fraction of `Greater` labels among the training samples that reached
    /// the leaf.
    Leaf { prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { prob } => prob,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn tree_probs(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_prob(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let forest: RandomForest = serde_json::from_str(text)?;
        for (t, tree) in forest.trees.iter().enumerate() {
            let ok = !tree.nodes.is_empty()
                && tree.nodes.iter().enumerate().all(|(i, n)| match *n {
                    // children after parents keeps traversal acyclic
                    Node::Split {
                        feature,
                        left,
                        right,
                        ..
                    } => {
                        feature < forest.n_features
                            && (i + 1..tree.nodes.len()).contains(&left)
                            && (i + 1..tree.nodes.len()).contains(&right)
                    }
                    Node::Leaf { prob } => (0.0..=1.0).contains(&prob),
                });
            if !ok {
                return Err(Error::invalid(format!("tree {t} is malformed")));
            }
        }
        if forest.trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        Ok(forest)
    }
}

impl PreferenceModel for RandomForest {
    fn input_dim(&self) -> usize {
        self.n_features
    }

    fn predict_prob(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_prob(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Feature column recoded as indices into its sorted distinct values.
struct Column {
    values: Vec<f64>,
    codes: Vec<u32>,
}

impl Column {
    fn new(raw: impl Iterator<Item = f64> + Clone) -> Column {
        let mut values: Vec<f64> = raw.clone().collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let codes = raw
            .map(|v| values.binary_search_by(|p| p.total_cmp(&v)).expect("value present") as u32)
            .collect();
        Column { values, codes }
    }
}

/// Trains `config.n_trees` CART trees; tree `t` draws from its own seeded
/// stream, so the result is independent of thread count.
pub fn train_forest(pairs: &[PairExample], config: &ForestConfig, seed: u64) -> Result<RandomForest> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("forest training needs at least one pair"));
    }
    if config.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    if config.min_samples_leaf == 0 {
        return Err(Error::invalid("min_samples_leaf must be at least 1"));
    }
    let n_features = pairs[0].features.len();
    if n_features == 0 {
        return Err(Error::invalid("pairs carry no features"));
    }
    if let Some(p) = pairs.iter().find(|p| p.features.len() != n_features) {
        return Err(Error::DimensionMismatch {
            expected: n_features,
            found: p.features.len(),
        });
    }
    let max_features = config.resolved_max_features(n_features)?;

    let columns: Vec<Column> = (0..n_features)
        .into_par_iter()
        .map(|f| Column::new(pairs.iter().map(move |p| p.features[f])))
        .collect();
    let labels: Vec<bool> = pairs.iter().map(|p| p.label.is_positive()).collect();

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed, "tree", t as u64);
            let n = labels.len();
            let mut weights = vec![0u32; n];
            if config.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1;
                }
            } else {
                weights.fill(1);
            }
            TreeBuilder {
                columns: &columns,
                labels: &labels,
                weights: &weights,
                max_features,
                min_leaf: config.min_samples_leaf as u64,
                max_depth: config.max_depth,
                rng,
                scratch: Vec::new(),
                hist: Vec::new(),
            }
            .build()
        })
        .collect();

    Ok(RandomForest {
        n_features,
        config: config.clone(),
        trees,
    })
}

struct Split {
    score: f64,
    feature: usize,
    code: u32,
    threshold: f64,
}

struct TreeBuilder<'a> {
    columns: &'a [Column],
    labels: &'a [bool],
    weights: &'a [u32],
    max_features: usize,
    min_leaf: u64,
    max_depth: Option<usize>,
    rng: seed::Rng,
    /// (code, weight, positive weight) for the node under evaluation
    scratch: Vec<(u32, u64, u64)>,
    hist: Vec<(u64, u64)>,
}

impl TreeBuilder<'_> {
    fn build(mut self) -> Tree {
        let mut samples: Vec<u32> = (0..self.labels.len() as u32)
            .filter(|&i| self.weights[i as usize] > 0)
            .collect();
        let mut nodes = vec![Node::Leaf { prob: 0.0 }];
        // (node index, start, end, depth)
        let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
        let mut features: Vec<usize> = (0..self.columns.len()).collect();

        while let Some((node, start, end, depth)) = stack.pop() {
            let slice = &samples[start..end];
            let (w, pos) = slice.iter().fold((0u64, 0u64), |(w, p), &s| {
                let ws = u64::from(self.weights[s as usize]);
                (w + ws, p + if self.labels[s as usize] { ws } else { 0 })
            });
            let prob = pos as f64 / w as f64;
            let terminal = pos == 0
                || pos == w
                || w < 2 * self.min_leaf
                || self.max_depth.is_some_and(|d| depth >= d);
            let split = if terminal {
                None
            } else {
                self.best_split(slice, w, pos, &mut features)
            };
            let Some(split) = split else {
                nodes[node] = Node::Leaf { prob };
                continue;
            };

            let codes = &self.columns[split.feature].codes;
            let mid = start + partition_in_place(&mut samples[start..end], |&s| codes[s as usize] <= split.code);
            let left = nodes.len();
            nodes.push(Node::Leaf { prob: 0.0 });
            nodes.push(Node::Leaf { prob: 0.0 });
            nodes[node] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, mid, end, depth + 1));
            stack.push((left, start, mid, depth + 1));
        }
        Tree { nodes }
    }

    /// Best Gini split over randomly ordered features, stopping once
    /// `max_features` non-constant features have been examined.
    fn best_split(&mut self, slice: &[u32], w: u64, pos: u64, features: &mut [usize]) -> Option<Split> {
        let mut best: Option<Split> = None;
        let mut examined = 0;
        for i in 0..features.len() {
            let j = self.rng.gen_range(i..features.len());
            features.swap(i, j);
            let f = features[i];
            let Some((score, code, threshold)) = self.scan_feature(f, slice, w, pos) else {
                continue;
            };
            examined += 1;
            if best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(Split {
                    score,
                    feature: f,
                    code,
                    threshold,
                });
            }
            if examined >= self.max_features {
                break;
            }
        }
        best
    }

    /// Returns `None` when the feature is constant on the node or no
    /// threshold leaves `min_leaf` weight on both sides.
    fn scan_feature(&mut self, f: usize, slice: &[u32], w: u64, pos: u64) -> Option<(f64, u32, f64)> {
        let col = &self.columns[f];
        let n_bins = col.values.len();
        self.scratch.clear();

        // Dense histogram when the node is large relative to the number of
        // distinct values, otherwise sort the node's codes.
        if slice.len() * 4 >= n_bins {
            self.hist.clear();
            self.hist.resize(n_bins, (0, 0));
            for &s in slice {
                let s = s as usize;
                let ws = u64::from(self.weights[s]);
                let h = &mut self.hist[col.codes[s] as usize];
                h.0 += ws;
                if self.labels[s] {
                    h.1 += ws;
                }
            }
            for (code, &(cw, cp)) in self.hist.iter().enumerate() {
                if cw > 0 {
                    self.scratch.push((code as u32, cw, cp));
                }
            }
        } else {
            for &s in slice {
                let s = s as usize;
                let ws = u64::from(self.weights[s]);
                self.scratch
                    .push((col.codes[s], ws, if self.labels[s] { ws } else { 0 }));
            }
            self.scratch.sort_unstable_by_key(|e| e.0);
        }

        if self.scratch.first()?.0 == self.scratch.last()?.0 {
            return None;
        }

        let mut best: Option<(f64, u32, u32)> = None;
        let (mut wl, mut pl) = (0u64, 0u64);
        let mut i = 0;
        while i < self.scratch.len() {
            let code = self.scratch[i].0;
            while i < self.scratch.len() && self.scratch[i].0 == code {
                wl += self.scratch[i].1;
                pl += self.scratch[i].2;
                i += 1;
            }
            if i == self.scratch.len() {
                break;
            }
            let wr = w - wl;
            if wl < self.min_leaf || wr < self.min_leaf {
                continue;
            }
            let pr = pos - pl;
            let (nl, nr) = (wl - pl, wr - pr);
            let score = ((pl * pl + nl * nl) as f64) / wl as f64 + ((pr * pr + nr * nr) as f64) / wr as f64;
            if best.map_or(true, |b| score > b.0) {
                best = Some((score, code, self.scratch[i].0));
            }
        }
        let (score, lo, hi) = best?;
        let (a, b) = (col.values[lo as usize], col.values[hi as usize]);
        let mut threshold = a + (b - a) / 2.0;
        if threshold >= b {
            threshold = a;
        }
        Some((score, lo, threshold))
    }
}

/// Unstable partition; returns the number of elements satisfying `pred`,
/// which are moved to the front.
fn partition_in_place<T>(v: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut first = 0;
    for i in 0..v.len() {
        if pred(&v[i]) {
            v.swap(first, i);
            first += 1;
        }
    }
    first
}

/// Weighted Gini impurity of a node holding `pos` positives out of `w`.
pub fn gini(pos: f64, w: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let p = pos / w;
    2.0 * p * (1.0 - p)
}
