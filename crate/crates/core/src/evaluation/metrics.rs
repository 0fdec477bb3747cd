//! Threshold-free ranking metrics.
//!
//! `roc_auc` is the Mann–Whitney statistic: the fraction of (positive, negative)
//! pairs where the positive scores higher, tied pairs counting one half.
//!
//! `pr_auc` is average precision, a step integral of the precision–recall curve:
//! `AP = sum_k (R_k - R_{k-1}) * P_k` over distinct score thresholds in descending
//! order, where `P_k` and `R_k` are precision and recall when every item scoring at
//! least the k-th threshold is predicted positive. Tied scores enter together as a
//! single threshold. No trapezoidal interpolation is applied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Groups of equal scores in descending order, each as (positives, negatives).
fn tie_groups(scores: &[f64], labels: &[bool]) -> Result<Vec<(usize, usize)>> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let order = sorted_desc(scores);
    let mut groups = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut p, mut n) = (0, 0);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                p += 1;
            } else {
                n += 1;
            }
            k += 1;
        }
        groups.push((p, n));
    }
    Ok(groups)
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let groups = tie_groups(scores, labels)?;
    let n_pos: usize = groups.iter().map(|g| g.0).sum();
    let n_neg: usize = groups.iter().map(|g| g.1).sum();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes"));
    }
    // Twice the Mann–Whitney U, kept integral.
    let mut twice_u: u128 = 0;
    let mut neg_below = n_neg as u128;
    for &(p, n) in &groups {
        neg_below -= n as u128;
        twice_u += 2 * p as u128 * neg_below + p as u128 * n as u128;
    }
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let groups = tie_groups(scores, labels)?;
    let n_pos: usize = groups.iter().map(|g| g.0).sum();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs at least one positive"));
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for &(p, n) in &groups {
        tp += p;
        seen += p + n;
        if p > 0 {
            ap += (p as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Per-fold values with mean and sample (n-1) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / n as f64
        };
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { values, mean, std }
    }

    /// `0.992±0.003`.
    pub fn pm(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub roc_auc: Summary,
    pub pr_auc: Summary,
}

impl MetricResult {
    pub fn from_folds(roc: Vec<f64>, pr: Vec<f64>) -> Self {
        MetricResult {
            roc_auc: Summary::new(roc),
            pr_auc: Summary::new(pr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn roc_fixtures() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &lab(&[1, 1, 0])).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.2, 0.5, 0.1], &lab(&[1, 1, 0, 0])).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.3; 6], &lab(&[1, 0, 1, 0, 0, 1])).unwrap(), 0.5);
    }

    #[test]
    fn roc_single_class() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &lab(&[1, 1])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn pr_fixtures() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.2, 0.1], &lab(&[1, 1, 0, 0])).unwrap(), 1.0);
        let ap = pr_auc(&[0.9, 0.2, 0.5, 0.1], &lab(&[1, 1, 0, 0])).unwrap();
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-15);
        for n in 1..8 {
            let mut scores: Vec<f64> = (0..n).map(|k| (n - k) as f64).collect();
            let mut labels = vec![false; n];
            labels[n - 1] = true;
            scores[n - 1] = 0.0;
            assert!((pr_auc(&scores, &labels).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn pr_no_positive() {
        assert!(pr_auc(&[0.1], &lab(&[0])).is_err());
    }

    #[test]
    fn summary_sample_std() {
        let s = Summary::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::new(vec![0.9921, 0.9924]).pm(), "0.992±0.000");
    }

    #[test]
    fn mismatched_lengths() {
        assert!(roc_auc(&[0.1, 0.2], &lab(&[1])).is_err());
    }
}
