//! Datasets, CSV ingestion, stratified folds, tail summaries and the synthetic
//! heavy-tailed generator.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    /// Builds a dataset, checking that every instance has `feature_names.len()`
    /// features and a finite target.
    pub fn new(
        instances: Vec<Instance>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        for inst in &instances {
            if inst.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: inst.features.len(),
                });
            }
            if !inst.target.is_finite() {
                return Err(Error::invalid(format!(
                    "instance {} has non-finite target",
                    inst.id
                )));
            }
        }
        Ok(Self {
            instances,
            feature_names,
            target_name: target_name.into(),
        })
    }

    /// Convenience constructor from parallel feature rows and targets; ids are
    /// row positions and feature names are `x0, x1, ...`.
    pub fn from_rows(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::invalid("feature rows and targets differ in length"));
        }
        let dim = features.first().map_or(0, Vec::len);
        let instances = features
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(id, (features, target))| Instance {
                id,
                features,
                target,
            })
            .collect();
        Self::new(
            instances,
            (0..dim).map(|i| format!("x{i}")).collect(),
            "target",
        )
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.target).collect()
    }

    pub fn distinct_targets(&self) -> usize {
        let mut t = self.targets();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.len()
    }

    /// Sub-dataset holding the instances at `positions`, ids preserved.
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        Dataset {
            instances: positions.iter().map(|&p| self.instances[p].clone()).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut row: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
            row.push(inst.target.to_string());
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::invalid(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

/// Reads a headed, comma-separated numeric file. Every column other than
/// `target_column` becomes a feature, in header order. Instance ids are the
/// zero-based data-row positions.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, Some(target_column))
}

/// Parses CSV text. With `target_column = None` all columns are features and
/// targets are set to zero (query files without outcomes).
pub fn parse_csv(text: &str, target_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let target_idx = match target_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingTargetColumn(name.to_owned()))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut instances = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row, header excluded
        let row = row_idx + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut features = Vec::with_capacity(feature_names.len());
        let mut target = 0.0;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::NonNumeric {
                    row,
                    column: header[col].clone(),
                    value: cell.to_owned(),
                }
            })?;
            if Some(col) == target_idx {
                target = value;
            } else {
                features.push(value);
            }
        }
        instances.push(Instance {
            id: row_idx,
            features,
            target,
        });
    }
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(
        instances,
        feature_names,
        target_column.unwrap_or("target"),
    )
}

/// Pearson kurtosis `m4 / m2^2` with population moments (a normal sample gives
/// about 3).
pub fn kurtosis(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::UndefinedKurtosis("fewer than 4 values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), &v| {
        let d2 = (v - mean) * (v - mean);
        (m2 + d2, m4 + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    if m2 <= (1e-12 * scale).powi(2) {
        return Err(Error::UndefinedKurtosis("zero variance"));
    }
    Ok(m4 / (m2 * m2))
}

/// `(value, P(X >= value))` for every distinct value, ascending.
pub fn ccdf_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("ccdf of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        out.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// instance id -> fold index
    pub fold_of: BTreeMap<usize, usize>,
}

impl FoldAssignment {
    /// Positions (indices into `dataset.instances`) of the train and test
    /// parts for `fold`.
    pub fn split(&self, dataset: &Dataset, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (pos, inst) in dataset.instances.iter().enumerate() {
            if self.fold_of[&inst.id] == fold {
                test.push(pos);
            } else {
                train.push(pos);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Quantile-stratified k-fold assignment for a continuous target.
///
/// Instances are sorted by target (ties by id) and cut into `n_strata`
/// contiguous strata of near-equal size. Each stratum is shuffled and dealt
/// round-robin; the dealing position carries over between strata so fold
/// sizes differ by at most one.
pub fn stratified_kfold(
    dataset: &Dataset,
    k: usize,
    n_strata: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    let n = dataset.len();
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    if n_strata == 0 {
        return Err(Error::invalid("n_strata must be at least 1"));
    }
    let mut order: Vec<&Instance> = dataset.instances.iter().collect();
    order.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.id.cmp(&b.id)));

    let strata = n_strata.min(n);
    let mut fold_of = BTreeMap::new();
    let mut dealt = 0usize;
    for s in 0..strata {
        let lo = s * n / strata;
        let hi = (s + 1) * n / strata;
        let mut ids: Vec<usize> = order[lo..hi].iter().map(|i| i.id).collect();
        ids.shuffle(&mut seed::rng(seed, "stratum", s as u64));
        for id in ids {
            if fold_of.insert(id, dealt % k).is_some() {
                return Err(Error::invalid(format!("duplicate instance id {id}")));
            }
            dealt += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    /// Pareto shape; smaller is heavier.
    pub tail_index: f64,
    /// Noise standard deviation in units of the latent score's standard
    /// deviation.
    pub noise_scale: f64,
    pub seed: u64,
}

/// Heavy-tailed regression data with a feature-predictable target.
///
/// Features are i.i.d. uniform on [0, 1]; the latent score is a positively
/// weighted sum of the features plus Gaussian noise. The target is the Pareto
/// (scale 1, shape `tail_index`) quantile at the mid-rank `(r + 0.5) / n` of
/// the noisy score, so the target marginal is heavy-tailed and monotone in the
/// score.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    let SyntheticConfig {
        n,
        d,
        tail_index,
        noise_scale,
        seed,
    } = *cfg;
    if n < 10 {
        return Err(Error::invalid("synthetic generator needs n >= 10"));
    }
    if d < 1 {
        return Err(Error::invalid("synthetic generator needs d >= 1"));
    }
    if !(tail_index > 0.0 && tail_index.is_finite()) {
        return Err(Error::invalid("tail_index must be positive"));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::invalid("noise_scale must be non-negative"));
    }

    let mut weight_rng = seed::rng(seed, "synthetic-weights", 0);
    let weights: Vec<f64> = (0..d).map(|_| weight_rng.gen_range(0.5..1.5)).collect();

    let mut feature_rng = seed::rng(seed, "synthetic-features", 0);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| feature_rng.gen::<f64>()).collect())
        .collect();
    let scores: Vec<f64> = features
        .iter()
        .map(|f| f.iter().zip(&weights).map(|(x, w)| x * w).sum())
        .collect();

    // uniform features: Var(score) = sum(w^2) / 12
    let score_sd = (weights.iter().map(|w| w * w).sum::<f64>() / 12.0).sqrt();
    let mut noise_rng = seed::rng(seed, "synthetic-noise", 0);
    let noisy: Vec<f64> = scores
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            s + noise_scale * score_sd * z
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| noisy[a].total_cmp(&noisy[b]).then(a.cmp(&b)));
    let mut targets = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let u = (rank as f64 + 0.5) / n as f64;
        targets[i] = (1.0 - u).powf(-1.0 / tail_index);
    }
    Dataset::from_rows(features, targets)
}
