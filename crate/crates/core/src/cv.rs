//! Stratified cross-validation over a set of estimators.

use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::metrics::{emd, ks_statistic, roc_auc, MetricReport};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub strata: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            strata: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub ks: f64,
    pub emd: f64,
    /// `None` when the fold's actuals have a single distinct value.
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub folds: Vec<FoldScores>,
    /// Metrics over the union of all held-out predictions.
    pub pooled: MetricReport,
    pub auc_mean: f64,
    /// Sample standard deviation across folds.
    pub auc_std: f64,
    /// Held-out prediction per instance, in dataset order.
    #[serde(skip)]
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n: usize,
    pub d: usize,
    pub target: String,
    pub config: CvConfig,
    pub methods: Vec<MethodReport>,
}

impl CvReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Runs every estimator on the same stratified folds. Each estimator gets a
/// per-fold seed derived from the root seed and its name.
pub fn cross_validate(dataset: &Dataset, estimators: &[&dyn Estimator], cfg: &CvConfig) -> Result<CvReport> {
    if estimators.is_empty() {
        return Err(Error::EmptyInput("no estimators selected"));
    }
    let folds = stratified_kfold(dataset, cfg.folds, cfg.strata, seed::derive(cfg.seed, "folds", 0))?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..cfg.folds).map(|f| folds.split(dataset, f)).collect();
    let actual = dataset.targets();

    let mut methods = Vec::with_capacity(estimators.len());
    for est in estimators {
        let mut predictions = vec![f64::NAN; dataset.len()];
        let mut scores = Vec::with_capacity(cfg.folds);
        for (f, (train_pos, test_pos)) in splits.iter().enumerate() {
            let train = dataset.subset(train_pos);
            let test = dataset.subset(test_pos);
            let out = est.fit_predict(&train, &test, seed::derive(cfg.seed, est.name(), f as u64))?;
            if out.predictions.len() != test.len() {
                return Err(Error::invalid(format!(
                    "{} returned {} predictions for {} test instances",
                    est.name(),
                    out.predictions.len(),
                    test.len()
                )));
            }
            let test_actual = test.targets();
            scores.push(FoldScores {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                ks: ks_statistic(&test_actual, &out.predictions)?,
                emd: emd(&test_actual, &out.predictions)?,
                auc: roc_auc(&test_actual, &out.predictions).ok().map(|c| c.auc),
                training_pairs: out.training_pairs,
            });
            for (&pos, &p) in test_pos.iter().zip(&out.predictions) {
                predictions[pos] = p;
            }
        }
        let aucs: Vec<f64> = scores.iter().filter_map(|s| s.auc).collect();
        let (auc_mean, auc_std) = mean_std(&aucs);
        methods.push(MethodReport {
            name: est.name().to_owned(),
            pooled: MetricReport::compute(&actual, &predictions)?,
            folds: scores,
            auc_mean,
            auc_std,
            predictions,
        });
    }
    Ok(CvReport {
        n: dataset.len(),
        d: dataset.dim(),
        target: dataset.target_name.clone(),
        config: *cfg,
        methods,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
