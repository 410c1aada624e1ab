//! The class-balance sweep: train where trainable, pick one model per
//! classifier, test it at every requested proportion.
//!
//! Protocol per trainable classifier: at each non-degenerate level a sample
//! is drawn, models are fit by repeated stratified shuffles
//! ([`super::cross_validate`]), and that level's winner is scored on its test
//! part. The single best model across levels — judged by that *test* score,
//! which leaks selection information but is replicated here deliberately —
//! is then re-evaluated at every level to produce the reported curve. The
//! leak-free alternative (selection by validation AUC) is computed alongside
//! and reported under a `_valsel` suffix. Rule-based classifiers need no
//! training and are evaluated directly per level.
//!
//! Every cell derives its RNG seed from the master seed and its coordinates,
//! so reports are reproducible regardless of thread scheduling.

use super::cv::{cross_validate, SplitRatios};
use super::metrics::{confusion, single_point_auc, ConfusionMatrix};
use super::{derive_seed, EvalError};
use crate::data::{generate_synthetic, load_dataset, SynthConfig};
use crate::domain::Dataset;
use crate::features::{
    attribute_stats, attributes_for_build, build_feature_matrix, AttributeCatalog, AttributeVector,
};
use crate::fuzzy::{classify_fuzzy, fuzzify_ruleset, sgd_optimize, FuzzySystem, SgdConfig};
use crate::resample::{max_feasible_size, subsample_indices, ProportionLevel};
use crate::rules::{classify_boolean, parse_rules, print_rules, RuleSet, EXAMPLE_RULES};
use crate::svm::{self, Kernel, SvmConfig, SvmModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

const SEED_TRAIN_DRAW: u64 = 0;
const SEED_CV: u64 = 1;
const SEED_EVAL_DRAW: u64 = 2;

/// Fuzzy scores above this are positive calls.
const FUZZY_DECISION_THRESHOLD: f64 = 0.5;

/// Where the labeled pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Consumption and inspection CSV files.
    Csv { readings: PathBuf, inspections: PathBuf },
    /// Seeded synthetic generator.
    Synthetic { config: SynthConfig },
}

/// One classifier to sweep, with its training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    /// Crisp rule set; label 1 when any rule fires. Not trained.
    Boolean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        /// Inline rule text; the built-in example set when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules: Option<String>,
    },
    /// The rule set compiled to a Mamdani system and tuned by SGD.
    Fuzzy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules: Option<String>,
        #[serde(default)]
        sgd: SgdConfig,
    },
    /// Support vector machine on the raw daily-average features.
    Svm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        config: SvmConfig,
    },
}

impl ClassifierSpec {
    /// Report/file name: the explicit name, else one derived from the kind.
    pub fn name(&self) -> String {
        let explicit = match self {
            ClassifierSpec::Boolean { name, .. }
            | ClassifierSpec::Fuzzy { name, .. }
            | ClassifierSpec::Svm { name, .. } => name,
        };
        if let Some(name) = explicit {
            return name.clone();
        }
        match self {
            ClassifierSpec::Boolean { .. } => "boolean".into(),
            ClassifierSpec::Fuzzy { .. } => "fuzzy_sgd".into(),
            ClassifierSpec::Svm { config, .. } => match config.kernel {
                Kernel::Linear => "linear_svm".into(),
                Kernel::Rbf { .. } => "rbf_svm".into(),
            },
        }
    }

}

fn default_levels() -> Vec<ProportionLevel> {
    ProportionLevel::standard_levels()
}

fn default_target_size() -> usize {
    100_000
}

fn default_window() -> usize {
    12
}

fn default_folds() -> usize {
    10
}

fn default_master_seed() -> u64 {
    42
}

/// Everything a sweep needs; serializable so runs can be re-created from the
/// report's config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "default_levels")]
    pub levels: Vec<ProportionLevel>,
    /// Per-level sample size; capped to pool supply with a logged warning.
    #[serde(default = "default_target_size")]
    pub target_size: usize,
    /// Feature window, months.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Stratified shuffles per training level.
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Default output directory; command-line flags may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |msg: String| Err(EvalError::InvalidConfig(msg));
        if self.classifiers.is_empty() {
            return invalid("at least one classifier is required".into());
        }
        let mut names = Vec::new();
        for spec in &self.classifiers {
            let name = spec.name();
            if name.is_empty()
                || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return invalid(format!(
                    "classifier name {name:?} must be non-empty and use only \
                     letters, digits, '_' or '-'"
                ));
            }
            if names.contains(&name) {
                return invalid(format!(
                    "duplicate classifier name {name:?}; set distinct names"
                ));
            }
            names.push(name);
        }
        if self.levels.is_empty() {
            return invalid("at least one proportion level is required".into());
        }
        for (i, level) in self.levels.iter().enumerate() {
            if self.levels[..i].contains(level) {
                return invalid(format!("duplicate proportion level {level}"));
            }
        }
        if self.target_size == 0 {
            return invalid("target_size must be positive".into());
        }
        if self.window == 0 {
            return invalid("window must be at least one month".into());
        }
        if self.folds == 0 {
            return invalid("folds must be positive".into());
        }
        self.ratios.validate()
    }
}

/// The labeled examples the sweep draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub examples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub window: usize,
    /// Customers without a usable row: no inspection, incomplete window, or
    /// attribute window longer than the available history.
    pub excluded: usize,
}

/// Metric set for one curve point; fields are absent where an actual class
/// is empty (e.g. recall at the 0% level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tpr: Option<f64>,
}

impl CellMetrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let tpr = cm.true_positive_rate();
        let tnr = cm.true_negative_rate();
        CellMetrics {
            accuracy: cm.accuracy(),
            auc: tpr.zip(tnr).map(|(recall, specificity)| single_point_auc(recall, specificity)),
            tnr,
            fpr: cm.false_positive_rate(),
            fnr: cm.false_negative_rate(),
            tpr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Evaluated {
        sample_size: usize,
        confusion: ConfusionMatrix,
        metrics: CellMetrics,
        runtime_seconds: f64,
    },
    Skipped {
        reason: String,
    },
    Failed {
        error: String,
    },
}

/// One point of a classifier's curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub level: ProportionLevel,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LevelTrainingOutcome {
    Trained {
        sample_size: usize,
        selected_fold: usize,
        validation_auc: f64,
        test_auc: f64,
        runtime_seconds: f64,
    },
    Skipped {
        reason: String,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTraining {
    pub level: ProportionLevel,
    pub outcome: LevelTrainingOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub per_level: Vec<LevelTraining>,
    /// Level whose model had the best *test* AUC — the replicated selection
    /// protocol. Selecting on the test score leaks; compare the `valsel`
    /// fields for the leak-free variant.
    pub selected_level: Option<ProportionLevel>,
    /// Level whose model had the best validation AUC.
    pub valsel_level: Option<ProportionLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub name: String,
    pub model_file: Option<String>,
    pub valsel_model_file: Option<String>,
    /// Absent for classifiers that need no training.
    pub training: Option<TrainingSummary>,
    /// The reported curve: the selected model at every level.
    pub cells: Vec<CellReport>,
    /// The validation-selected model's curve (trainable classifiers only).
    pub valsel_cells: Option<Vec<CellReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub pool: PoolSummary,
    pub classifiers: Vec<ClassifierReport>,
}

/// A file the sweep wants written next to the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub models: Vec<ModelArtifact>,
}

struct Pool {
    features: Vec<Vec<f64>>,
    attributes: Vec<AttributeVector>,
    labels: Vec<bool>,
}

impl Pool {
    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }
}

fn build_pool(
    dataset: &Dataset,
    window: usize,
    catalog: &AttributeCatalog,
) -> Result<(Pool, PoolSummary), EvalError> {
    let build = build_feature_matrix(dataset, window);
    let attributes = attributes_for_build(dataset, &build, catalog);
    let mut pool = Pool { features: Vec::new(), attributes: Vec::new(), labels: Vec::new() };
    let mut missing_attributes = 0usize;
    for (i, attrs) in attributes.into_iter().enumerate() {
        match attrs {
            Some(attrs) => {
                pool.features.push(build.matrix.values[i].clone());
                pool.attributes.push(attrs);
                pool.labels.push(build.targets.labels[i]);
            }
            None => missing_attributes += 1,
        }
    }
    if pool.labels.is_empty() {
        return Err(EvalError::EmptyPool(format!(
            "{} customers lack an inspection or a complete {window}-month window, \
             {missing_attributes} lack the attribute window ({} months)",
            build.exclusions.len(),
            catalog.required_window(),
        )));
    }
    let summary = PoolSummary {
        examples: pool.labels.len(),
        positives: pool.positives(),
        negatives: pool.negatives(),
        window,
        excluded: build.exclusions.len() + missing_attributes,
    };
    Ok((pool, summary))
}

enum Prepared {
    Boolean { rules: RuleSet },
    Fuzzy { rules: RuleSet, sgd: SgdConfig },
    Svm { config: SvmConfig },
}

impl Prepared {
    fn trainable(&self) -> bool {
        !matches!(self, Prepared::Boolean { .. })
    }
}

fn prepare(spec: &ClassifierSpec, catalog: &AttributeCatalog) -> Result<Prepared, EvalError> {
    let parse = |text: &Option<String>| {
        parse_rules(text.as_deref().unwrap_or(EXAMPLE_RULES), catalog).map_err(|e| {
            EvalError::InvalidConfig(format!("classifier {:?}: {e}", spec.name()))
        })
    };
    Ok(match spec {
        ClassifierSpec::Boolean { rules, .. } => Prepared::Boolean { rules: parse(rules)? },
        ClassifierSpec::Fuzzy { rules, sgd, .. } => {
            Prepared::Fuzzy { rules: parse(rules)?, sgd: sgd.clone() }
        }
        ClassifierSpec::Svm { config, .. } => {
            config.validate().map_err(|e| {
                EvalError::InvalidConfig(format!("classifier {:?}: {e}", spec.name()))
            })?;
            Prepared::Svm { config: config.clone() }
        }
    })
}

#[derive(Clone)]
enum TrainedModel {
    Boolean(RuleSet),
    Fuzzy(FuzzySystem),
    Svm(SvmModel),
}

impl TrainedModel {
    fn predict_pool(&self, pool: &Pool, indices: &[usize]) -> Result<Vec<bool>, EvalError> {
        let classifier_err = |e: &dyn std::fmt::Display| EvalError::Classifier(e.to_string());
        indices
            .iter()
            .map(|&i| match self {
                TrainedModel::Boolean(rules) => classify_boolean(rules, &pool.attributes[i])
                    .map(|d| d.label)
                    .map_err(|e| classifier_err(&e)),
                TrainedModel::Fuzzy(system) => {
                    classify_fuzzy(system, &pool.attributes[i], FUZZY_DECISION_THRESHOLD)
                        .map(|d| d.label)
                        .map_err(|e| classifier_err(&e))
                }
                TrainedModel::Svm(model) => svm::predict(model, &pool.features[i])
                    .map(|(_, label)| label)
                    .map_err(|e| classifier_err(&e)),
            })
            .collect()
    }

    fn artifact(&self, file_stem: &str) -> ModelArtifact {
        match self {
            TrainedModel::Boolean(rules) => ModelArtifact {
                file_name: format!("{file_stem}.rules"),
                contents: print_rules(rules),
            },
            TrainedModel::Fuzzy(system) => ModelArtifact {
                file_name: format!("{file_stem}.json"),
                contents: format!(
                    "{}\n",
                    serde_json::to_string_pretty(system).expect("system serializes")
                ),
            },
            TrainedModel::Svm(model) => ModelArtifact {
                file_name: format!("{file_stem}.json"),
                contents: format!("{}\n", model.to_json()),
            },
        }
    }
}

/// A trained level's model with the scores selection uses.
struct Candidate {
    level_index: usize,
    model: TrainedModel,
    validation_auc: f64,
    test_auc: f64,
}

/// Draws the cell's sample, capping the target to pool supply.
fn draw_sample(
    pool: &Pool,
    level: ProportionLevel,
    target_size: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    let cap = max_feasible_size(pool.positives(), pool.negatives(), level.fraction());
    let size = target_size.min(cap);
    if size == 0 {
        // Delegate so the error names the missing class and feasible maximum.
        subsample_indices(&pool.labels, level, target_size, seed)?;
        unreachable!("an infeasible draw must error");
    }
    if size < target_size {
        log::warn!("level {level}: sample capped to {size} of requested {target_size}");
    }
    Ok(subsample_indices(&pool.labels, level, size, seed)?)
}

fn train_cell(
    pool: &Pool,
    prepared: &Prepared,
    config: &ExperimentConfig,
    classifier_index: usize,
    level_index: usize,
) -> (LevelTrainingOutcome, Option<Candidate>) {
    let level = config.levels[level_index];
    let fraction = level.fraction();
    if fraction == 0.0 || fraction == 1.0 {
        let reason =
            format!("untrainable: a {level} sample has one class, training needs both");
        return (LevelTrainingOutcome::Skipped { reason }, None);
    }
    let (ci, li) = (classifier_index as u64, level_index as u64);
    let start = Instant::now();
    let failed = |e: EvalError| (LevelTrainingOutcome::Failed { error: e.to_string() }, None);

    let draw_seed = derive_seed(config.master_seed, &[ci, li, SEED_TRAIN_DRAW]);
    let sample = match draw_sample(pool, level, config.target_size, draw_seed) {
        Ok(sample) => sample,
        Err(e) => return failed(e),
    };
    let sample_labels: Vec<bool> = sample.iter().map(|&i| pool.labels[i]).collect();
    let global = |part: &[usize]| -> Vec<usize> { part.iter().map(|&s| sample[s]).collect() };

    let trainer = |_fold: usize, train: &[usize], validation: &[usize]| {
        let classifier_err = |e: &dyn std::fmt::Display| EvalError::Classifier(e.to_string());
        match prepared {
            Prepared::Boolean { .. } => unreachable!("rule sets are not trained"),
            Prepared::Fuzzy { rules, sgd } => {
                let pairs = |part: &[usize]| -> Vec<(AttributeVector, bool)> {
                    global(part)
                        .into_iter()
                        .map(|i| (pool.attributes[i].clone(), pool.labels[i]))
                        .collect()
                };
                let train_pairs = pairs(train);
                let train_attrs: Vec<AttributeVector> =
                    train_pairs.iter().map(|(a, _)| a.clone()).collect();
                let stats = attribute_stats(&train_attrs, &AttributeCatalog::shipped_default());
                let system = fuzzify_ruleset(rules, &stats).map_err(|e| classifier_err(&e))?;
                let outcome = sgd_optimize(&system, &train_pairs, &pairs(validation), sgd)
                    .map_err(|e| classifier_err(&e))?;
                Ok(TrainedModel::Fuzzy(outcome.system))
            }
            Prepared::Svm { config: svm_config } => {
                let rows = |part: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
                    let indices = global(part);
                    (
                        indices.iter().map(|&i| pool.features[i].clone()).collect(),
                        indices.iter().map(|&i| pool.labels[i]).collect(),
                    )
                };
                let (train_rows, train_labels) = rows(train);
                let (val_rows, val_labels) = rows(validation);
                let (model, _c) = svm::train_svm_selected(
                    &train_rows,
                    &train_labels,
                    &val_rows,
                    &val_labels,
                    svm_config,
                )
                .map_err(|e| classifier_err(&e))?;
                Ok(TrainedModel::Svm(model))
            }
        }
    };
    let predictor = |model: &TrainedModel, part: &[usize]| model.predict_pool(pool, &global(part));

    let cv_seed = derive_seed(config.master_seed, &[ci, li, SEED_CV]);
    match cross_validate(&sample_labels, config.folds, &config.ratios, cv_seed, trainer, predictor)
    {
        Ok(outcome) => (
            LevelTrainingOutcome::Trained {
                sample_size: sample.len(),
                selected_fold: outcome.selected_fold,
                validation_auc: outcome.validation_auc,
                test_auc: outcome.test_metrics.auc,
                runtime_seconds: start.elapsed().as_secs_f64(),
            },
            Some(Candidate {
                level_index,
                model: outcome.model,
                validation_auc: outcome.validation_auc,
                test_auc: outcome.test_metrics.auc,
            }),
        ),
        Err(e) => failed(e),
    }
}

fn evaluate_cell(
    pool: &Pool,
    model: &TrainedModel,
    config: &ExperimentConfig,
    classifier_index: usize,
    level_index: usize,
) -> CellReport {
    let level = config.levels[level_index];
    let failed = |e: EvalError| CellReport {
        level,
        outcome: CellOutcome::Failed { error: e.to_string() },
    };
    let seed = derive_seed(
        config.master_seed,
        &[classifier_index as u64, level_index as u64, SEED_EVAL_DRAW],
    );
    let start = Instant::now();
    let sample = match draw_sample(pool, level, config.target_size, seed) {
        Ok(sample) => sample,
        Err(e) => return failed(e),
    };
    let predictions = match model.predict_pool(pool, &sample) {
        Ok(predictions) => predictions,
        Err(e) => return failed(e),
    };
    let labels: Vec<bool> = sample.iter().map(|&i| pool.labels[i]).collect();
    let cm = match confusion(&predictions, &labels) {
        Ok(cm) => cm,
        Err(e) => return failed(e),
    };
    CellReport {
        level,
        outcome: CellOutcome::Evaluated {
            sample_size: sample.len(),
            confusion: cm,
            metrics: CellMetrics::from_confusion(&cm),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    }
}

/// Runs the full sweep. Pure apart from reading the data source; writing
/// files is [`write_experiment_outputs`]'s job.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, EvalError> {
    config.validate()?;
    let dataset = match &config.data {
        DataSource::Synthetic { config: synth } => generate_synthetic(synth)?,
        DataSource::Csv { readings, inspections } => load_dataset(readings, inspections)?,
    };
    let catalog = AttributeCatalog::shipped_default();
    let (pool, pool_summary) = build_pool(&dataset, config.window, &catalog)?;
    let prepared: Vec<(String, Prepared)> = config
        .classifiers
        .iter()
        .map(|spec| Ok((spec.name(), prepare(spec, &catalog)?)))
        .collect::<Result<_, EvalError>>()?;

    // Phase 1: train every (trainable classifier, level) cell in parallel.
    let train_tasks: Vec<(usize, usize)> = prepared
        .iter()
        .enumerate()
        .filter(|(_, (_, p))| p.trainable())
        .flat_map(|(ci, _)| (0..config.levels.len()).map(move |li| (ci, li)))
        .collect();
    let mut train_results: Vec<Option<(LevelTrainingOutcome, Option<Candidate>)>> =
        train_tasks
            .par_iter()
            .map(|&(ci, li)| Some(train_cell(&pool, &prepared[ci].1, config, ci, li)))
            .collect();

    // Phase 2: pick each classifier's model and list the evaluation cells.
    struct Assembly {
        name: String,
        training: Option<TrainingSummary>,
        selected: Option<TrainedModel>,
        valsel: Option<TrainedModel>,
        valsel_shares_model: bool,
    }
    let mut assemblies: Vec<Assembly> = Vec::with_capacity(prepared.len());
    let mut task_cursor = 0usize;
    for (name, p) in &prepared {
        if !p.trainable() {
            let rules = match p {
                Prepared::Boolean { rules } => rules.clone(),
                _ => unreachable!(),
            };
            assemblies.push(Assembly {
                name: name.clone(),
                training: None,
                selected: Some(TrainedModel::Boolean(rules)),
                valsel: None,
                valsel_shares_model: false,
            });
            continue;
        }
        let mut per_level = Vec::with_capacity(config.levels.len());
        let mut candidates: Vec<Candidate> = Vec::new();
        for li in 0..config.levels.len() {
            let (outcome, candidate) =
                train_results[task_cursor].take().expect("each task consumed once");
            task_cursor += 1;
            per_level.push(LevelTraining { level: config.levels[li], outcome });
            candidates.extend(candidate);
        }
        let best_by = |key: fn(&Candidate) -> f64| -> Option<usize> {
            let mut best: Option<usize> = None;
            for (i, candidate) in candidates.iter().enumerate() {
                if best.map_or(true, |b| key(candidate) > key(&candidates[b])) {
                    best = Some(i);
                }
            }
            best
        };
        let selected = best_by(|c| c.test_auc);
        let valsel = best_by(|c| c.validation_auc);
        assemblies.push(Assembly {
            name: name.clone(),
            training: Some(TrainingSummary {
                per_level,
                selected_level: selected.map(|i| config.levels[candidates[i].level_index]),
                valsel_level: valsel.map(|i| config.levels[candidates[i].level_index]),
            }),
            valsel_shares_model: selected == valsel,
            valsel: valsel.map(|i| candidates[i].model.clone()),
            selected: selected.map(|i| candidates[i].model.clone()),
        });
    }

    // Phase 3: evaluate every curve point in parallel.
    let eval_tasks: Vec<(usize, usize, bool, &TrainedModel)> = assemblies
        .iter()
        .enumerate()
        .flat_map(|(ci, a)| {
            let primary = a.selected.iter().flat_map(move |model| {
                (0..config.levels.len()).map(move |li| (ci, li, false, model))
            });
            let valsel = a.valsel.iter().flat_map(move |model| {
                (0..config.levels.len()).map(move |li| (ci, li, true, model))
            });
            primary.chain(valsel)
        })
        .collect();
    let cell_results: Vec<CellReport> = eval_tasks
        .par_iter()
        .map(|&(ci, li, _, model)| evaluate_cell(&pool, model, config, ci, li))
        .collect();

    // Phase 4: assemble the report and model files.
    let mut by_task = eval_tasks.iter().zip(cell_results);
    let mut classifiers = Vec::with_capacity(assemblies.len());
    let mut models = Vec::new();
    for (ci, assembly) in assemblies.iter().enumerate() {
        let mut take_cells = |valsel: bool| -> Vec<CellReport> {
            (0..config.levels.len())
                .map(|li| {
                    let (&(tci, tli, tvalsel, _), cell) =
                        by_task.next().expect("every eval task has a result");
                    assert_eq!((tci, tli, tvalsel), (ci, li, valsel), "task order");
                    cell
                })
                .collect()
        };
        let skipped_cells = || {
            config
                .levels
                .iter()
                .map(|&level| CellReport {
                    level,
                    outcome: CellOutcome::Skipped {
                        reason: "no model: training failed or was skipped at every level".into(),
                    },
                })
                .collect()
        };
        let mut model_file = None;
        let cells = match &assembly.selected {
            Some(model) => {
                let artifact = model.artifact(&format!("model_{}", assembly.name));
                model_file = Some(artifact.file_name.clone());
                models.push(artifact);
                take_cells(false)
            }
            None => skipped_cells(),
        };
        let mut valsel_model_file = None;
        let valsel_cells = match &assembly.valsel {
            Some(model) => {
                if assembly.valsel_shares_model {
                    valsel_model_file = model_file.clone();
                } else {
                    let artifact = model.artifact(&format!("model_{}_valsel", assembly.name));
                    valsel_model_file = Some(artifact.file_name.clone());
                    models.push(artifact);
                }
                Some(take_cells(true))
            }
            None if assembly.training.is_some() => Some(skipped_cells()),
            None => None,
        };
        classifiers.push(ClassifierReport {
            name: assembly.name.clone(),
            model_file,
            valsel_model_file,
            training: assembly.training.clone(),
            cells,
            valsel_cells,
        });
    }

    Ok(ExperimentOutput {
        report: ExperimentReport {
            config: config.clone(),
            pool: pool_summary,
            classifiers,
        },
        models,
    })
}

fn format_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// The flat per-point curve table (one row per evaluated cell;
/// validation-selected curves carry a `_valsel` name suffix).
pub fn curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("level,classifier,auc,tnr,fpr,fnr,tpr\n");
    for classifier in &report.classifiers {
        let mut emit = |name: &str, cells: &[CellReport]| {
            for cell in cells {
                if let CellOutcome::Evaluated { metrics, .. } = &cell.outcome {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        cell.level.fraction(),
                        name,
                        format_opt(metrics.auc),
                        format_opt(metrics.tnr),
                        format_opt(metrics.fpr),
                        format_opt(metrics.fnr),
                        format_opt(metrics.tpr),
                    );
                }
            }
        };
        emit(&classifier.name, &classifier.cells);
        if let Some(valsel_cells) = &classifier.valsel_cells {
            emit(&format!("{}_valsel", classifier.name), valsel_cells);
        }
    }
    out
}

fn confusion_csv(cm: &ConfusionMatrix, metrics: &CellMetrics) -> String {
    format!(
        "tp,fn,tn,fp,tpr,fnr,tnr,fpr\n{},{},{},{},{},{},{},{}\n",
        cm.true_positives,
        cm.false_negatives,
        cm.true_negatives,
        cm.false_positives,
        format_opt(metrics.tpr),
        format_opt(metrics.fnr),
        format_opt(metrics.tnr),
        format_opt(metrics.fpr),
    )
}

/// Writes `report.json`, `curves.csv`, per-cell confusion matrices and the
/// serialized models into `dir` (created if needed).
pub fn write_experiment_outputs(output: &ExperimentOutput, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let report_json = format!(
        "{}\n",
        serde_json::to_string_pretty(&output.report).expect("report serializes")
    );
    std::fs::write(dir.join("report.json"), report_json)?;
    std::fs::write(dir.join("curves.csv"), curves_csv(&output.report))?;
    for classifier in &output.report.classifiers {
        for cell in &classifier.cells {
            if let CellOutcome::Evaluated { confusion, metrics, .. } = &cell.outcome {
                let name = format!(
                    "confusion_{}_{}.csv",
                    classifier.name,
                    cell.level.fraction()
                );
                std::fs::write(dir.join(name), confusion_csv(confusion, metrics))?;
            }
        }
    }
    for model in &output.models {
        std::fs::write(dir.join(&model.file_name), &model.contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::Kernel;

    fn synth_source(n_customers: usize, ntl_fraction: f64, seed: u64) -> DataSource {
        DataSource::Synthetic {
            config: SynthConfig {
                n_customers,
                months: 15,
                ntl_fraction,
                seed,
                ..SynthConfig::default()
            },
        }
    }

    fn base_config(classifiers: Vec<ClassifierSpec>, levels: &[f64]) -> ExperimentConfig {
        ExperimentConfig {
            data: synth_source(400, 0.4, 5),
            classifiers,
            levels: levels.iter().map(|&f| ProportionLevel::new(f).unwrap()).collect(),
            target_size: 60,
            window: 12,
            folds: 2,
            ratios: SplitRatios::default(),
            master_seed: 9,
            output_dir: None,
        }
    }

    fn boolean_spec() -> ClassifierSpec {
        ClassifierSpec::Boolean { name: None, rules: None }
    }

    fn svm_spec() -> ClassifierSpec {
        ClassifierSpec::Svm {
            name: None,
            config: SvmConfig { epochs: 10, c_grid: vec![1.0], ..SvmConfig::default() },
        }
    }

    #[test]
    fn minimal_json_fills_in_the_documented_defaults() {
        let text = serde_json::json!({
            "data": { "source": "synthetic", "config": SynthConfig::default() },
            "classifiers": [ { "kind": "boolean" } ],
        })
        .to_string();
        let config = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(config.levels.len(), 17);
        assert_eq!(config.target_size, 100_000);
        assert_eq!(config.window, 12);
        assert_eq!(config.folds, 10);
        assert_eq!(config.ratios, SplitRatios::default());
        assert_eq!(config.master_seed, 42);
        assert_eq!(config.classifiers[0].name(), "boolean");
        assert!(config.validate().is_ok());

        let echoed = ExperimentConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(echoed, config);
    }

    #[test]
    fn derived_names_follow_the_kind_and_kernel() {
        assert_eq!(boolean_spec().name(), "boolean");
        let fuzzy = ClassifierSpec::Fuzzy { name: None, rules: None, sgd: SgdConfig::default() };
        assert_eq!(fuzzy.name(), "fuzzy_sgd");
        assert_eq!(svm_spec().name(), "linear_svm");
        let rbf = ClassifierSpec::Svm {
            name: Some("tuned".into()),
            config: SvmConfig { kernel: Kernel::Rbf { gamma: None }, ..SvmConfig::default() },
        };
        assert_eq!(rbf.name(), "tuned");
    }

    #[test]
    fn validation_rejects_malformed_configs() {
        let expect_invalid = |config: &ExperimentConfig, needle: &str| {
            let err = config.validate().unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} missing {needle:?}");
        };
        expect_invalid(&base_config(vec![], &[0.5]), "classifier");
        expect_invalid(
            &base_config(vec![svm_spec(), svm_spec()], &[0.5]),
            "duplicate classifier name",
        );
        let spaced = ClassifierSpec::Boolean { name: Some("a b".into()), rules: None };
        expect_invalid(&base_config(vec![spaced], &[0.5]), "name");
        expect_invalid(&base_config(vec![boolean_spec()], &[]), "level");
        expect_invalid(&base_config(vec![boolean_spec()], &[0.3, 0.3]), "duplicate proportion");
        let mut config = base_config(vec![boolean_spec()], &[0.5]);
        config.target_size = 0;
        expect_invalid(&config, "target_size");
        config.target_size = 60;
        config.folds = 0;
        expect_invalid(&config, "folds");
        config.folds = 2;
        config.window = 0;
        expect_invalid(&config, "window");
        config.window = 12;
        config.ratios.train = 0.9;
        expect_invalid(&config, "ratios");
    }

    #[test]
    fn boolean_sweep_evaluates_each_level_directly() {
        let config = base_config(vec![boolean_spec()], &[0.0, 0.05, 0.5]);
        let output = run_experiment(&config).unwrap();
        let report = &output.report;
        assert_eq!(report.pool.examples, report.pool.positives + report.pool.negatives);
        assert!(report.pool.positives > 30, "synthetic pool too small: {:?}", report.pool);

        let classifier = &report.classifiers[0];
        assert_eq!(classifier.name, "boolean");
        assert!(classifier.training.is_none());
        assert!(classifier.valsel_cells.is_none());
        assert_eq!(classifier.cells.len(), 3);
        for (cell, &fraction) in classifier.cells.iter().zip(&[0.0f64, 0.05, 0.5]) {
            let CellOutcome::Evaluated { sample_size, confusion, metrics, .. } = &cell.outcome
            else {
                panic!("cell not evaluated: {cell:?}");
            };
            assert_eq!(*sample_size, 60);
            let expected_positives = (60.0 * fraction).round() as u64;
            assert_eq!(confusion.actual_positives(), expected_positives);
            assert_eq!(metrics.auc.is_some(), fraction > 0.0);
            assert!(metrics.tnr.is_some());
        }

        assert_eq!(classifier.model_file.as_deref(), Some("model_boolean.rules"));
        let artifact = &output.models[0];
        assert_eq!(artifact.file_name, "model_boolean.rules");
        assert!(artifact.contents.contains("rule "));
    }

    #[test]
    fn svm_training_skips_degenerate_levels_but_still_curves_them() {
        let config = base_config(vec![svm_spec()], &[0.0, 0.5]);
        let output = run_experiment(&config).unwrap();
        let classifier = &output.report.classifiers[0];
        let training = classifier.training.as_ref().unwrap();

        match &training.per_level[0].outcome {
            LevelTrainingOutcome::Skipped { reason } => {
                assert!(reason.contains("untrainable"), "{reason}");
            }
            other => panic!("0% should skip training, got {other:?}"),
        }
        assert!(matches!(
            training.per_level[1].outcome,
            LevelTrainingOutcome::Trained { .. }
        ));
        assert_eq!(training.selected_level.map(|l| l.fraction()), Some(0.5));
        assert_eq!(training.valsel_level.map(|l| l.fraction()), Some(0.5));

        assert_eq!(classifier.cells.len(), 2);
        let CellOutcome::Evaluated { metrics, .. } = &classifier.cells[0].outcome else {
            panic!("0% evaluation cell missing");
        };
        assert!(metrics.auc.is_none() && metrics.tnr.is_some());
        let CellOutcome::Evaluated { metrics, .. } = &classifier.cells[1].outcome else {
            panic!("50% evaluation cell missing");
        };
        assert!(metrics.auc.is_some());

        // One trained level ⇒ both selections share the model file.
        assert_eq!(classifier.model_file.as_deref(), Some("model_linear_svm.json"));
        assert_eq!(classifier.valsel_model_file, classifier.model_file);
        assert_eq!(classifier.valsel_cells.as_ref().map(Vec::len), Some(2));
        assert_eq!(output.models.len(), 1);
    }

    #[test]
    fn fuzzy_training_produces_a_model_and_curves() {
        let fuzzy = ClassifierSpec::Fuzzy {
            name: None,
            rules: None,
            sgd: SgdConfig { epochs: 2, batch_size: 16, ..SgdConfig::default() },
        };
        let config = base_config(vec![fuzzy], &[0.4]);
        let output = run_experiment(&config).unwrap();
        let classifier = &output.report.classifiers[0];
        let training = classifier.training.as_ref().unwrap();
        assert!(matches!(
            training.per_level[0].outcome,
            LevelTrainingOutcome::Trained { .. }
        ));
        assert_eq!(training.selected_level.map(|l| l.fraction()), Some(0.4));
        assert!(matches!(classifier.cells[0].outcome, CellOutcome::Evaluated { .. }));
        let artifact = &output.models[0];
        assert_eq!(artifact.file_name, "model_fuzzy_sgd.json");
        assert!(artifact.contents.contains("\"variables\""));
    }

    #[test]
    fn all_degenerate_levels_leave_a_trainable_classifier_modelless() {
        let config = base_config(vec![svm_spec()], &[0.0, 1.0]);
        let output = run_experiment(&config).unwrap();
        let classifier = &output.report.classifiers[0];
        let training = classifier.training.as_ref().unwrap();
        assert!(training
            .per_level
            .iter()
            .all(|l| matches!(l.outcome, LevelTrainingOutcome::Skipped { .. })));
        assert_eq!(training.selected_level, None);
        assert!(classifier.model_file.is_none());
        assert!(classifier
            .cells
            .iter()
            .all(|c| matches!(c.outcome, CellOutcome::Skipped { .. })));
        assert!(output.models.is_empty());
    }

    /// Zeroes every runtime field so double runs can be compared.
    fn normalized(report: &ExperimentReport) -> serde_json::Value {
        fn scrub(value: &mut serde_json::Value) {
            match value {
                serde_json::Value::Object(map) => {
                    if let Some(runtime) = map.get_mut("runtime_seconds") {
                        *runtime = serde_json::Value::from(0.0);
                    }
                    map.values_mut().for_each(scrub);
                }
                serde_json::Value::Array(items) => items.iter_mut().for_each(scrub),
                _ => {}
            }
        }
        let mut value = serde_json::to_value(report).unwrap();
        scrub(&mut value);
        value
    }

    #[test]
    fn double_runs_match_excluding_runtime_and_write_the_documented_files() {
        let config = base_config(vec![boolean_spec(), svm_spec()], &[0.0, 0.5]);
        let first = run_experiment(&config).unwrap();
        let second = run_experiment(&config).unwrap();
        assert_eq!(normalized(&first.report), normalized(&second.report));
        assert_eq!(first.models, second.models);

        let dir = tempfile::tempdir().unwrap();
        write_experiment_outputs(&first, dir.path()).unwrap();
        let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();

        let curves = read("curves.csv");
        let mut lines = curves.lines();
        assert_eq!(lines.next(), Some("level,classifier,auc,tnr,fpr,fnr,tpr"));
        // 2 boolean + 2 svm + 2 svm_valsel evaluated cells.
        assert_eq!(lines.count(), 6);
        let zero_row = curves
            .lines()
            .find(|l| l.starts_with("0,boolean,"))
            .expect("boolean 0% row present");
        let fields: Vec<&str> = zero_row.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert!(fields[2].is_empty(), "auc must be empty at 0%: {zero_row}");
        assert!(!fields[3].is_empty(), "tnr defined at 0%: {zero_row}");
        assert!(fields[6].is_empty(), "tpr must be empty at 0%: {zero_row}");
        assert!(curves.lines().any(|l| l.starts_with("0.5,linear_svm_valsel,")));

        let confusion = read("confusion_boolean_0.5.csv");
        assert!(confusion.starts_with("tp,fn,tn,fp,tpr,fnr,tnr,fpr\n"));
        assert_eq!(confusion.lines().count(), 2);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("model_linear_svm.json").exists());
        assert!(read("model_boolean.rules").contains("rule "));

        let dir2 = tempfile::tempdir().unwrap();
        write_experiment_outputs(&second, dir2.path()).unwrap();
        assert_eq!(curves, std::fs::read_to_string(dir2.path().join("curves.csv")).unwrap());
    }
}
