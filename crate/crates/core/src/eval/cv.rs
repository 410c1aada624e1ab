//! Repeated stratified-shuffle model selection.
//!
//! "Cross validation" here is not k-fold: the pool is re-split `folds` times
//! into stratified train/validation/test parts at fixed ratios, one model is
//! fit per split, and the model with the best validation AUC wins. The
//! winner's test-part metrics are what gets reported.

use super::metrics::{confusion, metrics, ConfusionMatrix, MetricReport};
use super::{derive_seed, EvalError};
use crate::resample::SampleClass;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Train/validation/test fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.6, validation: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), EvalError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(EvalError::InvalidRatios(
                "every ratio must be positive and finite".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Disjoint index sets covering the whole pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits pool indices into shuffled train/validation/test parts, keeping
/// each class's share of every part within one example of its pool share.
///
/// Per class: train gets `round(n × train)`, validation `round(n ×
/// validation)`, test the remainder. Fully determined by `(labels, ratios,
/// seed)`.
pub fn stratified_shuffle_split(
    labels: &[bool],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<Split, EvalError> {
    ratios.validate()?;
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for class in [true, false] {
        let mut members: Vec<usize> =
            labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        let n_train = (n * ratios.train).round() as usize;
        let n_val = (n * ratios.validation).round() as usize;
        let rest = members.split_off(n_train);
        split.train.extend(members);
        let (val, test) = rest.split_at(n_val.min(rest.len()));
        split.validation.extend(val);
        split.test.extend(test);
    }
    split.train.shuffle(&mut rng);
    split.validation.shuffle(&mut rng);
    split.test.shuffle(&mut rng);
    Ok(split)
}

/// One repeat's validation score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub validation_auc: f64,
}

/// The outcome of [`cross_validate`]: the winning fold's model and its
/// test-part evaluation, plus every fold's validation score.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<M> {
    pub model: M,
    pub selected_fold: usize,
    /// The winning fold's validation AUC.
    pub validation_auc: f64,
    pub folds: Vec<FoldReport>,
    pub test_metrics: MetricReport,
    pub test_confusion: ConfusionMatrix,
}

/// Fits one model per stratified shuffle and keeps the best by validation
/// AUC (ties keep the lowest fold index).
///
/// `trainer` receives the fold index plus train and validation index sets —
/// the validation part is available for internal selection (epoch snapshots,
/// hyper-parameter grids), mirroring its role in fold selection. `predictor`
/// maps a model and an index set to hard labels. Fold split seeds derive
/// from `seed`, so the whole procedure is deterministic.
pub fn cross_validate<M>(
    labels: &[bool],
    folds: usize,
    ratios: &SplitRatios,
    seed: u64,
    trainer: impl Fn(usize, &[usize], &[usize]) -> Result<M, EvalError>,
    predictor: impl Fn(&M, &[usize]) -> Result<Vec<bool>, EvalError>,
) -> Result<CvOutcome<M>, EvalError> {
    if folds == 0 {
        return Err(EvalError::InvalidConfig("folds must be positive".into()));
    }
    ratios.validate()?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    for (class, available) in [(SampleClass::Positive, positives), (SampleClass::Negative, negatives)]
    {
        if available < folds {
            return Err(EvalError::ClassStarved { class, available, needed: folds });
        }
    }

    let part_labels =
        |part: &[usize]| -> Vec<bool> { part.iter().map(|&i| labels[i]).collect() };
    let mut reports = Vec::with_capacity(folds);
    let mut best: Option<CvOutcome<M>> = None;
    for fold in 0..folds {
        let split = stratified_shuffle_split(labels, ratios, derive_seed(seed, &[fold as u64]))?;
        let model = trainer(fold, &split.train, &split.validation)?;
        let val_predictions = predictor(&model, &split.validation)?;
        let validation_auc =
            metrics(&confusion(&val_predictions, &part_labels(&split.validation))?)?.auc;
        reports.push(FoldReport { fold, validation_auc });

        if best.as_ref().map_or(true, |b| validation_auc > b.validation_auc) {
            let test_predictions = predictor(&model, &split.test)?;
            let test_confusion = confusion(&test_predictions, &part_labels(&split.test))?;
            best = Some(CvOutcome {
                model,
                selected_fold: fold,
                validation_auc,
                folds: Vec::new(),
                test_metrics: metrics(&test_confusion)?,
                test_confusion,
            });
        }
    }
    let mut outcome = best.expect("folds >= 1");
    outcome.folds = reports;
    Ok(outcome)
}
