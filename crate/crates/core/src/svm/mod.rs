//! Maximum-margin classifier built from scratch.
//!
//! The linear kernel trains in the primal with stochastic subgradient
//! descent plus an exact scale polish ([`linear`]); the RBF kernel trains in
//! the dual with pairwise coordinate ascent ([`smo`]). Features are z-scored
//! internally and the standardization is stored in the model, so callers
//! always work in raw feature units. Labels are {0,1} at the API boundary
//! and {−1,+1} inside.
//!
//! Class imbalance is deliberately not reweighted here: the evaluation
//! pipeline controls imbalance by resampling instead, and a cost-sensitive
//! loss would double-correct.

mod linear;
mod smo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, TargetVector};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training data is empty")]
    EmptyInput,
    #[error("training data contains a single class only")]
    SingleClass,
    #[error("feature row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("expected {expected} features, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("labels ({labels}) and rows ({rows}) differ in count")]
    LabelCountMismatch { labels: usize, rows: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("validation set contains a single class; AUC-based selection is undefined")]
    SingleClassValidation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `K(u,v) = exp(−γ‖u−v‖²)`; `gamma: None` resolves at training time to
    /// 1/(N·Var) with Var the variance of all standardized feature cells.
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Hinge-loss weight in `(1/2)‖w‖² + C·Σ hinge`.
    pub c: f64,
    pub kernel: Kernel,
    /// Shuffled passes of the stochastic phase (linear kernel only).
    pub epochs: usize,
    pub seed: u64,
    /// Candidate C values for validation-based selection.
    pub c_grid: Vec<f64>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            kernel: Kernel::Linear,
            epochs: 40,
            seed: 42,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if let Kernel::Rbf { gamma: Some(g) } = self.kernel {
            if !(g.is_finite() && g > 0.0) {
                return Err(SvmError::InvalidConfig(format!("gamma must be positive, got {g}")));
            }
        }
        if self.epochs == 0 {
            return Err(SvmError::InvalidConfig("epochs must be at least 1".into()));
        }
        for &c in &self.c_grid {
            if !(c.is_finite() && c > 0.0) {
                return Err(SvmError::InvalidConfig(format!(
                    "c_grid entries must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-column z-score parameters learned from the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant columns store 1.0 so the
    /// transform stays a no-op for them.
    pub std: Vec<f64>,
}

impl Standardization {
    fn fit(rows: &[Vec<f64>]) -> Standardization {
        let n = rows[0].len();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for row in rows {
            for (m_j, x) in mean.iter_mut().zip(row) {
                *m_j += x;
            }
        }
        for m_j in mean.iter_mut() {
            *m_j /= m;
        }
        let mut var = vec![0.0; n];
        for row in rows {
            for ((v_j, m_j), x) in var.iter_mut().zip(&mean).zip(row) {
                *v_j += (x - m_j) * (x - m_j);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / m).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum ModelKind {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Rbf {
        gamma: f64,
        /// Standardized support vectors.
        support_vectors: Vec<Vec<f64>>,
        /// `αᵢ·yᵢ` per stored support vector.
        coefficients: Vec<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub standardization: Standardization,
    /// Configuration the model was trained with (C as actually used).
    pub config: SvmConfig,
}

impl SvmModel {
    pub fn feature_len(&self) -> usize {
        self.standardization.mean.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<SvmModel, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// `exp(−γ‖u−v‖²)`, in (0,1] for finite inputs.
pub fn kernel_rbf(u: &[f64], v: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if u.len() != v.len() {
        return Err(SvmError::LengthMismatch { expected: u.len(), got: v.len() });
    }
    let dist2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * dist2).exp())
}

pub(crate) enum ResolvedKernel {
    // Linear training goes through the primal solver; this variant exists
    // for dual-solver tests.
    #[cfg_attr(not(test), allow(dead_code))]
    Linear,
    Rbf { gamma: f64 },
}

impl ResolvedKernel {
    pub(crate) fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            ResolvedKernel::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            ResolvedKernel::Rbf { gamma } => {
                let dist2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * dist2).exp()
            }
        }
    }
}

fn check_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<(), SvmError> {
    if rows.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    if labels.len() != rows.len() {
        return Err(SvmError::LabelCountMismatch { labels: labels.len(), rows: rows.len() });
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(SvmError::InvalidConfig("feature rows are empty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(SvmError::LengthMismatch { expected: width, got: row.len() });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(SvmError::NonFinite { row: i });
        }
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

/// Default γ: inverse of (feature count × variance of all standardized
/// cells), the usual "scale" heuristic.
fn resolve_gamma(standardized: &[Vec<f64>], requested: Option<f64>) -> f64 {
    if let Some(g) = requested {
        return g;
    }
    let n = standardized[0].len();
    let count = (standardized.len() * n) as f64;
    let mean: f64 = standardized.iter().flatten().sum::<f64>() / count;
    let var: f64 =
        standardized.iter().flatten().map(|x| (x - mean) * (x - mean)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (n as f64 * var)
    } else {
        1.0 / n as f64
    }
}

/// Trains on raw (unstandardized) feature rows with {0,1} labels.
pub fn train_svm_rows(
    rows: &[Vec<f64>],
    labels: &[bool],
    config: &SvmConfig,
) -> Result<SvmModel, SvmError> {
    config.validate()?;
    check_rows(rows, labels)?;
    let standardization = Standardization::fit(rows);
    let standardized: Vec<Vec<f64>> = rows.iter().map(|r| standardization.apply(r)).collect();
    let labels_pm: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();

    let kind = match config.kernel {
        Kernel::Linear => {
            let fit = linear::pegasos(&standardized, &labels_pm, config.c, config.epochs, config.seed);
            ModelKind::Linear { weights: fit.weights, bias: fit.bias }
        }
        Kernel::Rbf { gamma } => {
            let gamma = resolve_gamma(&standardized, gamma);
            let sol = smo::smo_solve(&standardized, &labels_pm, &ResolvedKernel::Rbf { gamma }, config.c);
            let mut support_vectors = Vec::new();
            let mut coefficients = Vec::new();
            for ((alpha, row), y) in sol.alphas.iter().zip(&standardized).zip(&labels_pm) {
                if *alpha > smo::SUPPORT_EPS {
                    support_vectors.push(row.clone());
                    coefficients.push(alpha * y);
                }
            }
            ModelKind::Rbf { gamma, support_vectors, coefficients, bias: sol.bias }
        }
    };

    Ok(SvmModel { kind, standardization, config: config.clone() })
}

/// Trains from the aligned matrix/target pair the feature stage produces.
pub fn train_svm(
    features: &FeatureMatrix,
    targets: &TargetVector,
    config: &SvmConfig,
) -> Result<SvmModel, SvmError> {
    train_svm_rows(&features.values, &targets.labels, config)
}

/// Trains one model per `c_grid` entry and keeps the one with the highest
/// validation AUC (ties keep the earliest grid entry). Returns the winning
/// model and its C.
pub fn train_svm_selected(
    train_rows: &[Vec<f64>],
    train_labels: &[bool],
    val_rows: &[Vec<f64>],
    val_labels: &[bool],
    config: &SvmConfig,
) -> Result<(SvmModel, f64), SvmError> {
    config.validate()?;
    if config.c_grid.is_empty() {
        return Err(SvmError::InvalidConfig("c_grid is empty".into()));
    }
    let has_pos = val_labels.iter().any(|&y| y);
    let has_neg = val_labels.iter().any(|&y| !y);
    if !(has_pos && has_neg) {
        return Err(SvmError::SingleClassValidation);
    }
    let mut best: Option<(f64, SvmModel, f64)> = None;
    for &c in &config.c_grid {
        let candidate_config = SvmConfig { c, ..config.clone() };
        let model = train_svm_rows(train_rows, train_labels, &candidate_config)?;
        let mut tp = 0u64;
        let mut fneg = 0u64;
        let mut tn = 0u64;
        let mut fp = 0u64;
        for (row, &y) in val_rows.iter().zip(val_labels) {
            let (_, label) = predict(&model, row)?;
            match (y, label) {
                (true, true) => tp += 1,
                (true, false) => fneg += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
        let recall = tp as f64 / (tp + fneg) as f64;
        let specificity = tn as f64 / (tn + fp) as f64;
        let auc = (recall + specificity) / 2.0;
        if best.as_ref().map_or(true, |(best_auc, _, _)| auc > *best_auc) {
            best = Some((auc, model, c));
        }
    }
    let (_, model, c) = best.expect("c_grid checked non-empty");
    Ok((model, c))
}

/// Signed margin of one raw feature row.
pub fn decision_value(model: &SvmModel, row: &[f64]) -> Result<f64, SvmError> {
    if row.len() != model.feature_len() {
        return Err(SvmError::LengthMismatch { expected: model.feature_len(), got: row.len() });
    }
    let z = model.standardization.apply(row);
    Ok(match &model.kind {
        ModelKind::Linear { weights, bias } => {
            weights.iter().zip(&z).map(|(w, x)| w * x).sum::<f64>() + bias
        }
        ModelKind::Rbf { gamma, support_vectors, coefficients, bias } => {
            support_vectors
                .iter()
                .zip(coefficients)
                .map(|(sv, coef)| {
                    let dist2: f64 = sv.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                    coef * (-gamma * dist2).exp()
                })
                .sum::<f64>()
                + bias
        }
    })
}

/// (score, label); label 1 iff the score is strictly positive — a zero
/// margin stays uninspected.
pub fn predict(model: &SvmModel, row: &[f64]) -> Result<(f64, bool), SvmError> {
    let score = decision_value(model, row)?;
    Ok((score, score > 0.0))
}

pub fn predict_matrix(model: &SvmModel, rows: &[Vec<f64>]) -> Result<Vec<(f64, bool)>, SvmError> {
    rows.iter().map(|row| predict(model, row)).collect()
}
