//! Evaluation: binary-classification metrics, seeded k-fold splits,
//! cross-dataset summaries, and precision-recall curves.
//!
//! Degenerate denominators follow fixed conventions so that weak
//! classifiers score low instead of crashing: precision is 0 when
//! nothing was predicted positive, recall is 0 when nothing is actually
//! positive, and F1 is 0 whenever precision + recall is 0.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{left} predictions but {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("k must satisfy 2 <= k <= n; got k={k}, n={n}")]
    BadK { k: usize, n: usize },
    #[error("a cross-dataset report needs at least one dataset")]
    TooFewDatasets,
    #[error("precision-recall curve needs at least one positive label")]
    NoPositives,
}

/// Confusion counts and the derived precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Derive precision, recall, and F1 from confusion counts.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics { tp, fp, fn_, tn, precision, recall, f1 }
    }
}

/// Score predictions against labels (both 0/1, parallel slices).
pub fn metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Partition `0..n` into `k` seeded, disjoint, exhaustive folds.
///
/// Indices are shuffled once; the first `n % k` folds receive one extra
/// element, so sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_no in 0..k {
        let size = base + usize::from(fold_no < extra);
        folds.push(indices[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Precision, recall, and F1 as one row, without counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics of one evaluation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub name: String,
    pub metrics: Metrics,
}

/// Cross-dataset summary: unweighted per-dataset means and, when more
/// than one dataset is present, the sample variance of each metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub per_dataset: Vec<DatasetMetrics>,
    pub mean: MetricsSummary,
    /// Sample variance (n - 1 denominator); absent for one dataset.
    pub variance: Option<MetricsSummary>,
}

fn mean_and_sample_variance(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, Some(ss / (n - 1) as f64))
}

/// Summarize how a classifier carries across datasets. Each dataset
/// counts equally regardless of size.
pub fn generalization_report(
    per_dataset: Vec<DatasetMetrics>,
) -> Result<GeneralizationReport, EvalError> {
    if per_dataset.is_empty() {
        return Err(EvalError::TooFewDatasets);
    }
    let collect = |f: fn(&Metrics) -> f64| -> Vec<f64> {
        per_dataset.iter().map(|d| f(&d.metrics)).collect()
    };
    let (p_mean, p_var) = mean_and_sample_variance(&collect(|m| m.precision));
    let (r_mean, r_var) = mean_and_sample_variance(&collect(|m| m.recall));
    let (f_mean, f_var) = mean_and_sample_variance(&collect(|m| m.f1));
    let mean = MetricsSummary { precision: p_mean, recall: r_mean, f1: f_mean };
    let variance = match (p_var, r_var, f_var) {
        (Some(p), Some(r), Some(f)) => Some(MetricsSummary { precision: p, recall: r, f1: f }),
        _ => None,
    };
    Ok(GeneralizationReport { per_dataset, mean, variance })
}

/// One operating point of a precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// A precision-recall curve and its step-interpolated area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, thresholds descending.
    pub points: Vec<PrPoint>,
    /// Area under the curve: sum of precision times recall increment,
    /// starting from recall zero.
    pub auc: f64,
}

/// Sweep every distinct score as a threshold (prediction is positive
/// when the score is greater than or equal to it) and trace precision
/// against recall.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<PrCurve, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y != 0).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }

    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("scores must not be NaN"));
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len());
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    for &threshold in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&s, &y) in scores.iter().zip(labels) {
            if s >= threshold {
                if y != 0 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = tp as f64 / positives as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint { threshold, precision, recall });
    }
    Ok(PrCurve { points, auc })
}
