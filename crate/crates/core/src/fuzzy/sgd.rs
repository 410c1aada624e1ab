//! Minibatch SGD on membership-function parameters.
//!
//! The loss is logistic (binary cross-entropy) on the defuzzified score.
//! Gradients come from central finite differences per parameter — the
//! min/max/clip/centroid chain is piecewise-nondifferentiable, so analytic
//! subgradients would be error-prone bookkeeping. After each simultaneous
//! update every trapezoid is projected back to a ≤ b ≤ c ≤ d and sigmoid
//! steepness is kept away from zero, so the system stays valid after every
//! step. Model selection keeps the epoch snapshot (including the untouched
//! epoch-0 system) with the best validation AUC.
//!
//! Only input-variable parameters are tuned; the output membership functions
//! are fixed, which lets inference precompute their grid samples once.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::system::{FuzzySystem, OutputLabel};
use super::FuzzyError;
use crate::features::{AttributeStats, AttributeVector};

/// Relative size of the central-difference probe: step = 1e-4 of the
/// attribute's spread in the training data.
const FD_STEP_FRACTION: f64 = 1e-4;

/// Scores are clamped into [EPS, 1-EPS] before the logarithm.
const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 64,
            seed: 7,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), FuzzyError> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(FuzzyError::InvalidSgdConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(FuzzyError::InvalidSgdConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(FuzzyError::InvalidSgdConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    /// Snapshot with the best validation AUC (ties keep the earliest epoch).
    pub system: FuzzySystem,
    /// State after the final step, for stationarity checks.
    pub final_system: FuzzySystem,
    /// Entry 0 describes the untrained input system.
    pub trace: Vec<EpochStats>,
    pub selected_epoch: usize,
    pub steps_taken: usize,
}

/// Rule antecedents resolved to (variable, function) indices, plus the fixed
/// output-curve samples. Inference through this table is arithmetically
/// identical to [`super::system::mamdani_infer`], just without the lookups.
struct Engine {
    rules: Vec<(OutputLabel, Vec<(usize, usize)>)>,
    no_curve: Vec<f64>,
    ntl_curve: Vec<f64>,
    grid_step: f64,
}

impl Engine {
    fn new(system: &FuzzySystem) -> Result<Engine, FuzzyError> {
        let mut rules = Vec::with_capacity(system.rules.len());
        for rule in &system.rules {
            let mut terms = Vec::with_capacity(rule.antecedent.len());
            for term in &rule.antecedent {
                let var = system
                    .variables
                    .iter()
                    .position(|v| v.attribute == term.attribute)
                    .ok_or_else(|| FuzzyError::UnknownLabel {
                        rule: rule.name.clone(),
                        attribute: term.attribute.clone(),
                        label: term.label.clone(),
                    })?;
                let func = system.variables[var]
                    .functions
                    .iter()
                    .position(|f| f.label == term.label)
                    .ok_or_else(|| FuzzyError::UnknownLabel {
                        rule: rule.name.clone(),
                        attribute: term.attribute.clone(),
                        label: term.label.clone(),
                    })?;
                terms.push((var, func));
            }
            rules.push((rule.consequent, terms));
        }
        let n = system.grid_resolution;
        let grid_step = 1.0 / (n - 1) as f64;
        let xs = (0..n).map(|i| i as f64 * grid_step);
        Ok(Engine {
            rules,
            no_curve: xs.clone().map(|x| system.output.no_ntl.eval(x)).collect(),
            ntl_curve: xs.map(|x| system.output.ntl.eval(x)).collect(),
            grid_step,
        })
    }

    /// Max firing strength per output label, reading cached degrees. `subst`
    /// overrides one function's degree (the one a probe perturbed).
    fn strengths(&self, degrees: &[Vec<f64>], subst: Option<(usize, usize, f64)>) -> (f64, f64) {
        let mut no_ntl: f64 = 0.0;
        let mut ntl: f64 = 0.0;
        for (consequent, terms) in &self.rules {
            let mut strength: f64 = 1.0;
            for &(var, func) in terms {
                let degree = match subst {
                    Some((sv, sf, d)) if sv == var && sf == func => d,
                    _ => degrees[var][func],
                };
                strength = strength.min(degree);
            }
            match consequent {
                OutputLabel::NoNtl => no_ntl = no_ntl.max(strength),
                OutputLabel::Ntl => ntl = ntl.max(strength),
            }
        }
        (no_ntl, ntl)
    }

    /// Clip-aggregate-centroid with the precomputed output samples; same
    /// operation order as the reference path, bit for bit.
    fn score(&self, no_strength: f64, ntl_strength: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&no_mu, &ntl_mu)) in self.no_curve.iter().zip(&self.ntl_curve).enumerate() {
            let mu = no_strength.min(no_mu).max(ntl_strength.min(ntl_mu));
            num += i as f64 * self.grid_step * mu;
            den += mu;
        }
        if den == 0.0 {
            0.5
        } else {
            num / den
        }
    }
}

fn bce_loss(score: f64, label: bool) -> f64 {
    let p = score.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Balanced accuracy of `score > 0.5` labels; callers guarantee both classes
/// are present.
fn auc_at_half(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut tp, mut fneg, mut tn, mut fp) = (0u64, 0u64, 0u64, 0u64);
    for (score, &label) in scores.iter().zip(labels) {
        match (label, *score > 0.5) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let recall = tp as f64 / (tp + fneg) as f64;
    let specificity = tn as f64 / (tn + fp) as f64;
    (recall + specificity) / 2.0
}

/// One attribute value per input variable, in variable order.
fn value_matrix(
    system: &FuzzySystem,
    rows: &[(AttributeVector, bool)],
) -> Result<Vec<Vec<f64>>, FuzzyError> {
    rows.iter()
        .map(|(attrs, _)| {
            system
                .variables
                .iter()
                .map(|var| {
                    let v = attrs
                        .get(&var.attribute)
                        .ok_or_else(|| FuzzyError::MissingAttribute(var.attribute.clone()))?;
                    if !v.is_finite() {
                        return Err(FuzzyError::NonFiniteAttribute(var.attribute.clone()));
                    }
                    Ok(v)
                })
                .collect()
        })
        .collect()
}

fn degrees_into(system: &FuzzySystem, row: &[f64], out: &mut [Vec<f64>]) {
    for (var, (x, slot)) in system.variables.iter().zip(row.iter().zip(out)) {
        for (f, lf) in var.functions.iter().enumerate() {
            slot[f] = lf.mf.eval(*x);
        }
    }
}

fn full_scores(engine: &Engine, system: &FuzzySystem, values: &[Vec<f64>]) -> Vec<f64> {
    let mut degrees: Vec<Vec<f64>> = system
        .variables
        .iter()
        .map(|v| vec![0.0; v.functions.len()])
        .collect();
    values
        .iter()
        .map(|row| {
            degrees_into(system, row, &mut degrees);
            let (s_no, s_ntl) = engine.strengths(&degrees, None);
            engine.score(s_no, s_ntl)
        })
        .collect()
}

struct ParamRef {
    var: usize,
    func: usize,
    param: usize,
    step: f64,
}

/// Every tunable parameter with its finite-difference probe size, derived
/// from the owning attribute's spread in the training data: IQR, else full
/// range, else 1.
fn param_refs(system: &FuzzySystem, train_values: &[Vec<f64>]) -> Vec<ParamRef> {
    let mut refs = Vec::new();
    for (v, var) in system.variables.iter().enumerate() {
        let column: Vec<f64> = train_values.iter().map(|row| row[v]).collect();
        let stats = AttributeStats::from_values(&column);
        let mut spread = stats.iqr();
        if spread <= 0.0 {
            spread = stats.range();
        }
        if spread <= 0.0 {
            spread = 1.0;
        }
        let step = FD_STEP_FRACTION * spread;
        for (f, lf) in var.functions.iter().enumerate() {
            for p in 0..lf.mf.param_count() {
                refs.push(ParamRef { var: v, func: f, param: p, step });
            }
        }
    }
    refs
}

pub fn sgd_optimize(
    system: &FuzzySystem,
    train: &[(AttributeVector, bool)],
    val: &[(AttributeVector, bool)],
    config: &SgdConfig,
) -> Result<SgdOutcome, FuzzyError> {
    sgd_optimize_with_observer(system, train, val, config, |_| {})
}

/// As [`sgd_optimize`], additionally calling `observer` with the system
/// state after every projected update.
pub fn sgd_optimize_with_observer(
    system: &FuzzySystem,
    train: &[(AttributeVector, bool)],
    val: &[(AttributeVector, bool)],
    config: &SgdConfig,
    mut observer: impl FnMut(&FuzzySystem),
) -> Result<SgdOutcome, FuzzyError> {
    config.validate()?;
    system.validate()?;
    if train.is_empty() {
        return Err(FuzzyError::EmptyTraining);
    }
    let has_pos = val.iter().any(|(_, y)| *y);
    let has_neg = val.iter().any(|(_, y)| !*y);
    if !(has_pos && has_neg) {
        return Err(FuzzyError::SingleClassValidation);
    }

    let mut sys = system.clone();
    let engine = Engine::new(&sys)?;
    let train_values = value_matrix(&sys, train)?;
    let val_values = value_matrix(&sys, val)?;
    let train_labels: Vec<bool> = train.iter().map(|(_, y)| *y).collect();
    let val_labels: Vec<bool> = val.iter().map(|(_, y)| *y).collect();
    let params = param_refs(&sys, &train_values);

    let initial_loss = {
        let scores = full_scores(&engine, &sys, &train_values);
        scores
            .iter()
            .zip(&train_labels)
            .map(|(s, &y)| bce_loss(*s, y))
            .sum::<f64>()
            / train_values.len() as f64
    };
    let val_auc = |sys: &FuzzySystem| {
        auc_at_half(&full_scores(&engine, sys, &val_values), &val_labels)
    };
    let initial_auc = val_auc(&sys);
    let mut trace = vec![EpochStats { epoch: 0, train_loss: initial_loss, val_auc: initial_auc }];
    let mut best = (initial_auc, sys.clone(), 0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut batch_degrees: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut grads = vec![0.0; params.len()];
    let mut steps_taken = 0usize;
    let mut indices: Vec<usize> = (0..train_values.len()).collect();

    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(config.batch_size) {
            // Degrees under the current parameters, cached per batch row.
            batch_degrees.resize_with(batch.len(), || {
                sys.variables
                    .iter()
                    .map(|v| vec![0.0; v.functions.len()])
                    .collect()
            });
            for (slot, &row) in batch_degrees.iter_mut().zip(batch) {
                degrees_into(&sys, &train_values[row], slot);
            }

            let pre_loss: f64 = batch
                .iter()
                .zip(&batch_degrees)
                .map(|(&row, deg)| {
                    let (s_no, s_ntl) = engine.strengths(deg, None);
                    bce_loss(engine.score(s_no, s_ntl), train_labels[row])
                })
                .sum::<f64>()
                / batch.len() as f64;
            epoch_loss += pre_loss * batch.len() as f64;

            // Central differences: probe each parameter in isolation by
            // substituting the perturbed function's degree; the system's own
            // parameters stay untouched until the simultaneous update.
            for (g, pref) in grads.iter_mut().zip(&params) {
                let mf = &sys.variables[pref.var].functions[pref.func].mf;
                let orig = mf.param(pref.param);
                let probe = |delta: f64| -> f64 {
                    let mut shifted = mf.clone();
                    shifted.set_param(pref.param, orig + delta);
                    batch
                        .iter()
                        .zip(&batch_degrees)
                        .map(|(&row, deg)| {
                            let x = train_values[row][pref.var];
                            let subst = Some((pref.var, pref.func, shifted.eval(x)));
                            let (s_no, s_ntl) = engine.strengths(deg, subst);
                            bce_loss(engine.score(s_no, s_ntl), train_labels[row])
                        })
                        .sum::<f64>()
                        / batch.len() as f64
                };
                let plus = probe(pref.step);
                let minus = probe(-pref.step);
                *g = (plus - minus) / (2.0 * pref.step);
            }

            for (g, pref) in grads.iter().zip(&params) {
                let mf = &mut sys.variables[pref.var].functions[pref.func].mf;
                mf.set_param(pref.param, mf.param(pref.param) - config.learning_rate * g);
            }
            for var in &mut sys.variables {
                for lf in &mut var.functions {
                    lf.mf.project();
                }
            }
            debug_assert!(sys.validate().is_ok(), "projection must restore validity");
            steps_taken += 1;
            observer(&sys);
        }

        let epoch_auc = val_auc(&sys);
        trace.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_values.len() as f64,
            val_auc: epoch_auc,
        });
        if epoch_auc > best.0 {
            best = (epoch_auc, sys.clone(), epoch);
        }
    }

    Ok(SgdOutcome {
        system: best.1,
        final_system: sys,
        trace,
        selected_epoch: best.2,
        steps_taken,
    })
}
