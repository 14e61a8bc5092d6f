//! Linear classifiers trained by stochastic gradient descent.
//!
//! Both losses share one trainer: per example the weights are shrunk by
//! the L2 penalty, then the example adds its loss gradient. Margins are
//! computed from the weights as they stood at the start of the example,
//! so one update equals one gradient step on that example's regularized
//! objective — a fact the tests check against finite differences.
//!
//! The step size decays as `alpha0 / (1 + alpha0 * l2 * t)` with `t`
//! counting examples already processed. The bias is never regularized.
//!
//! A training set where every label agrees does not error: it produces a
//! constant predictor with the `degenerate` flag set, because one-sided
//! folds do happen in small cross-validation splits and the caller is
//! better placed to decide how much to care.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{sigmoid, stable_fingerprint};
use crate::vectorize::SparseVector;

/// Format version written into saved models.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation needs a logistic-loss model")]
    WrongLossKind,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("serialization error: {0}")]
    Serde(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Loss driving the per-example update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Max-margin: only margin violations update the weights.
    Hinge,
    /// Log-loss: every example updates, scaled by how wrong the
    /// current probability is. Supports probability outputs.
    Logistic,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Loss::Hinge => write!(f, "hinge"),
            Loss::Logistic => write!(f, "logistic"),
        }
    }
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial step size.
    pub alpha0: f64,
    /// L2 penalty strength.
    pub l2: f64,
    pub seed: u64,
    /// Visit examples in a fresh seeded order each epoch.
    pub shuffle: bool,
    /// Scale each row to unit L2 norm at train and predict time.
    pub row_l2_normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            alpha0: 0.01,
            l2: 1e-4,
            seed: 42,
            shuffle: true,
            row_l2_normalize: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LearnError> {
        if self.alpha0 <= 0.0 || self.alpha0.is_nan() {
            return Err(LearnError::BadConfig("alpha0 must be positive".into()));
        }
        if self.l2 < 0.0 || self.l2.is_nan() {
            return Err(LearnError::BadConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// A feature vector the trainer can consume: sparse or dense.
pub trait FeatureRow {
    fn dim(&self) -> usize;
    /// Inner product with a dense weight vector of matching dimension.
    fn dot(&self, weights: &[f64]) -> f64;
    /// `target += factor * self`.
    fn add_scaled(&self, target: &mut [f64], factor: f64);
    fn squared_norm(&self) -> f64;
}

impl FeatureRow for SparseVector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * weights[i]).sum()
    }

    fn add_scaled(&self, target: &mut [f64], factor: f64) {
        for &(i, v) in &self.entries {
            target[i] += factor * v;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }
}

impl FeatureRow for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn dot(&self, weights: &[f64]) -> f64 {
        crate::numeric::dot(self, weights)
    }

    fn add_scaled(&self, target: &mut [f64], factor: f64) {
        for (t, v) in target.iter_mut().zip(self) {
            *t += factor * v;
        }
    }

    fn squared_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }
}

/// A trained linear classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub version: u32,
    pub loss: Loss,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Rows are scaled to unit L2 norm before scoring.
    pub normalize_rows: bool,
    /// Set when training saw only one label; the model then predicts
    /// that label everywhere.
    pub degenerate: bool,
    /// Identity of the feature space the model was trained against.
    pub fingerprint: u64,
}

impl LinearModel {
    /// Default fingerprint when no feature space identity is supplied.
    fn default_fingerprint(loss: Loss, dim: usize) -> u64 {
        let loss = loss.to_string();
        let dim = dim.to_string();
        stable_fingerprint([loss.as_str(), dim.as_str()])
    }

    /// Replace the stored feature-space fingerprint.
    pub fn with_fingerprint(mut self, fingerprint: u64) -> Self {
        self.fingerprint = fingerprint;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Raw decision value `w . x + b` (with optional row normalization).
    pub fn score<R: FeatureRow>(&self, row: &R) -> Result<f64, LearnError> {
        if row.dim() != self.weights.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.weights.len(),
                got: row.dim(),
            });
        }
        let mut z = row.dot(&self.weights);
        if self.normalize_rows {
            let norm = row.squared_norm().sqrt();
            if norm > 0.0 {
                z /= norm;
            }
        }
        Ok(z + self.bias)
    }

    /// Class 1 if and only if the score is strictly positive.
    pub fn predict<R: FeatureRow>(&self, row: &R) -> Result<u8, LearnError> {
        Ok(u8::from(self.score(row)? > 0.0))
    }

    /// Probability of class 1. Logistic models only.
    pub fn predict_proba<R: FeatureRow>(&self, row: &R) -> Result<f64, LearnError> {
        if self.loss != Loss::Logistic {
            return Err(LearnError::WrongLossKind);
        }
        Ok(sigmoid(self.score(row)?))
    }

    /// Class 1 if and only if the probability exceeds `threshold`.
    /// Logistic models only.
    pub fn predict_with_threshold<R: FeatureRow>(
        &self,
        row: &R,
        threshold: f64,
    ) -> Result<u8, LearnError> {
        Ok(u8::from(self.predict_proba(row)? > threshold))
    }

    pub fn to_json_string(&self) -> Result<String, LearnError> {
        serde_json::to_string(self).map_err(|e| LearnError::Serde(e.to_string()))
    }

    pub fn from_json_str(json: &str) -> Result<Self, LearnError> {
        serde_json::from_str(json).map_err(|e| LearnError::Serde(e.to_string()))
    }

    pub fn save(&self, mut writer: impl Write) -> Result<(), LearnError> {
        let json = self.to_json_string()?;
        writer
            .write_all(json.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|e| LearnError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let mut json = String::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut json))
            .map_err(|e| LearnError::Io(e.to_string()))?;
        Self::from_json_str(&json)
    }
}

/// Train a linear classifier. Labels are 0 or 1.
pub fn train<R: FeatureRow>(
    rows: &[R],
    labels: &[u8],
    loss: Loss,
    config: &TrainConfig,
) -> Result<LinearModel, LearnError> {
    config.validate()?;
    if rows.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(LearnError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows[0].dim();
    for row in rows {
        if row.dim() != dim {
            return Err(LearnError::DimensionMismatch {
                expected: dim,
                got: row.dim(),
            });
        }
    }

    let mut model = LinearModel {
        version: MODEL_VERSION,
        loss,
        weights: vec![0.0; dim],
        bias: 0.0,
        normalize_rows: config.row_l2_normalize,
        degenerate: false,
        fingerprint: LinearModel::default_fingerprint(loss, dim),
    };

    if labels.iter().all(|&y| y == labels[0]) {
        model.bias = if labels[0] == 1 { 1.0 } else { -1.0 };
        model.degenerate = true;
        return Ok(model);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0usize;
    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let eta = config.alpha0 / (1.0 + config.alpha0 * config.l2 * t as f64);
            let row = &rows[i];
            let y = if labels[i] == 1 { 1.0 } else { -1.0 };
            let mut norm_factor = 1.0;
            if config.row_l2_normalize {
                let norm = row.squared_norm().sqrt();
                if norm > 0.0 {
                    norm_factor = 1.0 / norm;
                }
            }
            // Margin from the weights as they stood entering this
            // example; the shrink below must not feed into it.
            let z = row.dot(&model.weights) * norm_factor + model.bias;
            let pull = match loss {
                Loss::Hinge => {
                    if y * z < 1.0 {
                        y
                    } else {
                        0.0
                    }
                }
                Loss::Logistic => y * sigmoid(-y * z),
            };
            if config.l2 > 0.0 {
                let shrink = 1.0 - eta * config.l2;
                for w in &mut model.weights {
                    *w *= shrink;
                }
            }
            if pull != 0.0 {
                row.add_scaled(&mut model.weights, eta * pull * norm_factor);
                model.bias += eta * pull;
            }
            t += 1;
        }
    }
    Ok(model)
}
