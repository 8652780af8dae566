//! Distribution-level and threshold-level evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn non_empty(a: &[f64], b: &[f64], what: &'static str) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptyInput(what))
    } else {
        Ok(())
    }
}

/// Walks the merged support of two sorted samples, calling `f(x, next_x,
/// ecdf_a(x), ecdf_b(x))` at every distinct support point; `next_x` is `None`
/// at the last one.
fn merged_ecdf(a: &[f64], b: &[f64], mut f: impl FnMut(f64, Option<f64>, f64, f64)) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => Some(u.min(v)),
            (Some(&u), None) => Some(u),
            (None, Some(&v)) => Some(v),
            (None, None) => None,
        };
        f(x, next, i as f64 / na, j as f64 / nb);
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    non_empty(a, b, "ks statistic needs two non-empty samples")?;
    let (a, b) = (sorted(a), sorted(b));
    let mut d = 0.0f64;
    merged_ecdf(&a, &b, |_, _, fa, fb| d = d.max((fa - fb).abs()));
    Ok(d)
}

/// One-dimensional earth mover (Wasserstein-1) distance.
pub fn emd(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() == b.len() {
        emd_sorted_pairs(a, b)
    } else {
        emd_ecdf_integral(a, b)
    }
}

/// `integral |F_a(x) - F_b(x)| dx` over the merged support.
pub fn emd_ecdf_integral(a: &[f64], b: &[f64]) -> Result<f64> {
    non_empty(a, b, "emd needs two non-empty samples")?;
    let (a, b) = (sorted(a), sorted(b));
    let mut total = 0.0;
    merged_ecdf(&a, &b, |x, next, fa, fb| {
        if let Some(nx) = next {
            total += (fa - fb).abs() * (nx - x);
        }
    });
    Ok(total)
}

/// Mean absolute difference of order statistics; equal sizes only.
pub fn emd_sorted_pairs(a: &[f64], b: &[f64]) -> Result<f64> {
    non_empty(a, b, "emd needs two non-empty samples")?;
    if a.len() != b.len() {
        return Err(Error::invalid("sorted-pair emd needs equal sample sizes"));
    }
    let (a, b) = (sorted(a), sorted(b));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn aligned(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("no predictions to score"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// `|{pred >= t and actual >= t}| / |{actual >= t}|`; `None` when no actual
/// value reaches `t`.
pub fn tpr_at(actual: &[f64], predicted: &[f64], t: f64) -> Result<Option<f64>> {
    aligned(actual, predicted)?;
    let pos = actual.iter().filter(|&&y| y >= t).count();
    if pos == 0 {
        return Ok(None);
    }
    let tp = actual
        .iter()
        .zip(predicted)
        .filter(|(&y, &p)| y >= t && p >= t)
        .count();
    Ok(Some(tp as f64 / pos as f64))
}

/// `|{pred >= t and actual < t}| / |{actual < t}|`; `None` when every
/// actual value reaches `t`.
pub fn fpr_at(actual: &[f64], predicted: &[f64], t: f64) -> Result<Option<f64>> {
    aligned(actual, predicted)?;
    let neg = actual.iter().filter(|&&y| y < t).count();
    if neg == 0 {
        return Ok(None);
    }
    let fp = actual
        .iter()
        .zip(predicted)
        .filter(|(&y, &p)| y < t && p >= t)
        .count();
    Ok(Some(fp as f64 / neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// `None` for the (0,0) and (1,1) anchors.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by (fpr, tpr), anchors included.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Binary indexed tree over predicted-value ranks.
struct Fenwick(Vec<u32>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of entries with index < i.
    fn prefix(&self, mut i: usize) -> u32 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i &= i - 1;
        }
        s
    }
}

/// Threshold-sweep ROC: every distinct actual value is used as a threshold
/// for both actual and predicted values. Thresholds where TPR or FPR is
/// undefined are skipped.
///
/// The points of this sweep need not be monotone, so they are sorted by
/// (fpr, tpr) before trapezoid integration.
pub fn roc_auc(actual: &[f64], predicted: &[f64]) -> Result<RocCurve> {
    aligned(actual, predicted)?;
    let n = actual.len();
    let sorted_pred = sorted(predicted);
    let mut by_actual: Vec<usize> = (0..n).collect();
    by_actual.sort_by(|&a, &b| actual[b].total_cmp(&actual[a]));

    // rank of each prediction in sorted_pred (first index of its value)
    let pred_rank: Vec<usize> = predicted
        .iter()
        .map(|p| sorted_pred.partition_point(|x| x < p))
        .collect();

    let mut tree = Fenwick(vec![0; n + 1]);
    let mut points = vec![
        RocPoint {
            fpr: 0.0,
            tpr: 0.0,
            threshold: None,
        },
        RocPoint {
            fpr: 1.0,
            tpr: 1.0,
            threshold: None,
        },
    ];
    let mut distinct = 0;
    let mut k = 0;
    // descending thresholds; after inserting every instance with actual >= t,
    // the tree holds exactly the positives
    while k < n {
        let t = actual[by_actual[k]];
        distinct += 1;
        while k < n && actual[by_actual[k]] >= t {
            tree.add(pred_rank[by_actual[k]]);
            k += 1;
        }
        let pos = k;
        let neg = n - pos;
        if neg == 0 {
            continue;
        }
        let first_ge = sorted_pred.partition_point(|x| *x < t);
        let pred_ge = n - first_ge;
        let tp = pos - tree.prefix(first_ge) as usize;
        let fp = pred_ge - tp;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: Some(t),
        });
    }
    if distinct < 2 {
        return Err(Error::TooFewDistinctTargets(distinct));
    }
    points.sort_by(|a, b| {
        a.fpr
            .total_cmp(&b.fpr)
            .then(a.tpr.total_cmp(&b.tpr))
            .then_with(|| a.threshold.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.threshold.unwrap_or(f64::NEG_INFINITY)))
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Paired quantiles at levels `i / (n_quantiles + 1)`, `i = 1..=n_quantiles`.
pub fn qq_points(actual: &[f64], predicted: &[f64], n_quantiles: usize) -> Result<Vec<(f64, f64)>> {
    non_empty(actual, predicted, "q-q needs two non-empty samples")?;
    if n_quantiles < 2 {
        return Err(Error::invalid("n_quantiles must be at least 2"));
    }
    let (a, p) = (sorted(actual), sorted(predicted));
    Ok((1..=n_quantiles)
        .map(|i| {
            let level = i as f64 / (n_quantiles + 1) as f64;
            (quantile(&a, level), quantile(&p, level))
        })
        .collect())
}

pub const DEFAULT_QUANTILES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ks: f64,
    pub emd: f64,
    pub auc: f64,
    pub qq: Vec<(f64, f64)>,
}

impl MetricReport {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<MetricReport> {
        aligned(actual, predicted)?;
        Ok(MetricReport {
            ks: ks_statistic(actual, predicted)?,
            emd: emd(actual, predicted)?,
            auc: roc_auc(actual, predicted)?.auc,
            qq: qq_points(actual, predicted, DEFAULT_QUANTILES)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_closed_forms() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }

    #[test]
    fn emd_closed_forms() {
        assert_eq!(emd(&[0.0], &[5.0]).unwrap(), 5.0);
        assert_eq!(emd(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(emd_ecdf_integral(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(emd(&[1.0, 4.0], &[1.0, 4.0]).unwrap(), 0.0);
        // unequal sizes: {0} vs {0, 2} moves half the mass by 2
        assert_eq!(emd(&[0.0], &[0.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn tpr_fpr_hand_counts() {
        let (a, p) = ([1.0, 2.0], [2.0, 1.0]);
        assert_eq!(tpr_at(&a, &p, 2.0).unwrap(), Some(0.0));
        assert_eq!(fpr_at(&a, &p, 2.0).unwrap(), Some(1.0));
        assert_eq!(tpr_at(&a, &p, 3.0).unwrap(), None);
        assert_eq!(fpr_at(&a, &p, 1.0).unwrap(), None);
        let low = [0.0, 0.0];
        assert_eq!(tpr_at(&a, &low, 2.0).unwrap(), Some(0.0));
        assert_eq!(fpr_at(&a, &low, 2.0).unwrap(), Some(0.0));
    }

    #[test]
    fn roc_hand_cases() {
        let curve = roc_auc(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        assert_eq!(curve.auc, 0.0);
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        assert_eq!(roc_auc(&y, &y).unwrap().auc, 1.0);
        assert!(roc_auc(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn qq_shift_and_identity() {
        let a: Vec<f64> = (0..50).map(|i| f64::from(i * i)).collect();
        let shifted: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        for (x, y) in qq_points(&a, &a, 9).unwrap() {
            assert_eq!(x, y);
        }
        for (x, y) in qq_points(&a, &shifted, 99).unwrap() {
            assert!((y - x - 10.0).abs() < 1e-9);
        }
        assert_eq!(qq_points(&a, &a, 99).unwrap().len(), 99);
        assert!(qq_points(&a, &a, 1).is_err());
    }
}
