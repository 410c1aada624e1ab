//! Subcommand implementations.
//!
//! Every command writes artifacts only beneath its `--out` directory and
//! reports progress on the error stream. Failures are split into the two
//! exit-status channels of [`AppError`]: a rejected invocation or
//! configuration is `Usage`, everything that goes wrong with the data or
//! while running on it is `Data`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use ntlbench_core::data::{
    generate_synthetic, load_dataset, save_dataset, DataError, SynthConfig,
};
use ntlbench_core::domain::{validate_dataset, ConsumptionSeries, CustomerId, Dataset};
use ntlbench_core::eval::{
    confusion, cross_validate, run_experiment, write_experiment_outputs, CellMetrics,
    ClassifierSpec, ConfusionMatrix, DataSource, EvalError, ExperimentConfig, FoldReport,
    SplitRatios,
};
use ntlbench_core::features::{
    attribute_stats, attributes_for_build, build_feature_matrix, compute_attributes,
    daily_average_features, AttributeCatalog, AttributeVector,
};
use ntlbench_core::fuzzy::{
    classify_fuzzy, fuzzify_ruleset, sgd_optimize, FuzzySystem, SgdConfig,
};
use ntlbench_core::resample::ProportionLevel;
use ntlbench_core::rules::{classify_boolean, parse_rules, print_rules, RuleSet, EXAMPLE_RULES};
use ntlbench_core::svm::{self, SvmConfig, SvmModel};

use crate::{AppError, AppResult, Command};

/// Seed fallback consulted when `--seed` is absent.
const SEED_ENV: &str = "NTLBENCH_SEED";

/// Fuzzy scores above this defuzzified value are labeled positive.
const DECISION_THRESHOLD: f64 = 0.5;

pub fn run(command: Command) -> AppResult {
    match command {
        Command::Gen { config, out, seed } => gen(config.as_deref(), &out, seed),
        Command::Validate { readings, inspections } => validate(&readings, &inspections),
        Command::Features { readings, inspections, window, out } => {
            features(&readings, &inspections, window, &out)
        }
        Command::Train { config, out, seed } => train(&config, &out, seed),
        Command::Score { readings, inspections, model, window, out } => {
            score(&readings, &inspections, &model, window, &out)
        }
        Command::Evaluate { readings, inspections, model, window, out } => {
            evaluate(&readings, &inspections, &model, window, &out)
        }
        Command::Sweep { config, out, seed, jobs, levels, target_size, window } => {
            sweep(&config, out, seed, jobs, levels, target_size, window)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

impl AppError {
    fn usage(message: impl Into<String>) -> AppError {
        AppError::Usage(message.into())
    }

    fn data(message: impl Into<String>) -> AppError {
        AppError::Data(message.into())
    }
}

/// Configuration problems keep the usage exit status; everything else that a
/// running pipeline reports is a data failure.
fn eval_err(err: EvalError) -> AppError {
    match &err {
        EvalError::InvalidConfig(_) | EvalError::InvalidRatios(_) => {
            AppError::usage(err.to_string())
        }
        _ => AppError::data(err.to_string()),
    }
}

/// Seed precedence: the `--seed` flag, then `NTLBENCH_SEED`, then the
/// configured value.
fn resolve_seed(flag: Option<u64>, configured: u64) -> Result<u64, AppError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse().map_err(|_| {
            AppError::usage(format!("{SEED_ENV} must be an unsigned integer, got `{text}`"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(configured),
        Err(err) => Err(AppError::usage(format!("{SEED_ENV}: {err}"))),
    }
}

fn read_config_text(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path)
        .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = read_config_text(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))
}

fn load_data(readings: &Path, inspections: &Path) -> Result<Dataset, AppError> {
    load_dataset(readings, inspections).map_err(|e| AppError::data(e.to_string()))
}

fn load_source(source: &DataSource) -> Result<Dataset, AppError> {
    match source {
        DataSource::Csv { readings, inspections } => load_data(readings, inspections),
        DataSource::Synthetic { config } => {
            generate_synthetic(config).map_err(|e| AppError::usage(e.to_string()))
        }
    }
}

fn create_out_dir(out: &Path) -> AppResult {
    fs::create_dir_all(out)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> AppResult {
    fs::write(path, text).map_err(|e| AppError::data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

fn require_window(window: usize) -> AppResult {
    if window == 0 {
        return Err(AppError::usage("window must be at least one month"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Labeled pool: one row per inspected customer with complete history

struct Pool {
    ids: Vec<CustomerId>,
    features: Vec<Vec<f64>>,
    attributes: Vec<AttributeVector>,
    labels: Vec<bool>,
}

impl Pool {
    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Inspected customers that have both a complete feature window and a full
/// attribute vector; everyone else is dropped (and counted).
fn build_pool(dataset: &Dataset, window: usize, catalog: &AttributeCatalog) -> Result<Pool, AppError> {
    let build = build_feature_matrix(dataset, window);
    let attrs = attributes_for_build(dataset, &build, catalog);
    let mut pool =
        Pool { ids: Vec::new(), features: Vec::new(), attributes: Vec::new(), labels: Vec::new() };
    let mut missing_attrs = 0usize;
    for (i, attr) in attrs.into_iter().enumerate() {
        match attr {
            Some(attr) => {
                pool.ids.push(build.matrix.rows[i].clone());
                pool.features.push(build.matrix.values[i].clone());
                pool.attributes.push(attr);
                pool.labels.push(build.targets.labels[i]);
            }
            None => missing_attrs += 1,
        }
    }
    if missing_attrs > 0 {
        warn!(
            "{missing_attrs} row(s) dropped: the attribute history ({} months) \
             is longer than the feature window ({window})",
            catalog.required_window()
        );
    }
    if !build.exclusions.is_empty() {
        info!("{} customer(s) excluded from the labeled pool", build.exclusions.len());
    }
    if pool.labels.is_empty() {
        return Err(AppError::data(
            "no usable examples: every customer lacks an inspection or a complete history window",
        ));
    }
    Ok(pool)
}

// ---------------------------------------------------------------------------
// Saved models

/// A classifier in saved form: rule text, a fuzzy system, or a kernel machine.
enum Model {
    Rules(RuleSet),
    Fuzzy(FuzzySystem),
    Svm(SvmModel),
}

impl Model {
    fn kind(&self) -> &'static str {
        match self {
            Model::Rules(_) => "boolean rules",
            Model::Fuzzy(_) => "fuzzy system",
            Model::Svm(_) => "svm",
        }
    }

    fn file_name(&self, stem: &str) -> String {
        match self {
            Model::Rules(_) => format!("{stem}.rules"),
            Model::Fuzzy(_) | Model::Svm(_) => format!("{stem}.json"),
        }
    }

    fn save(&self, path: &Path) -> AppResult {
        let text = match self {
            Model::Rules(rules) => print_rules(rules),
            Model::Fuzzy(system) => {
                let mut text = serde_json::to_string_pretty(system).expect("model serializes");
                text.push('\n');
                text
            }
            Model::Svm(model) => {
                let mut text = model.to_json();
                text.push('\n');
                text
            }
        };
        write_text(path, &text)
    }

    /// Score and label for one example. The kernel machine reports its
    /// margin; the other models report a value in [0, 1].
    fn score_row(&self, features: &[f64], attrs: &AttributeVector) -> Result<(f64, bool), String> {
        match self {
            Model::Rules(rules) => classify_boolean(rules, attrs)
                .map(|d| (if d.label { 1.0 } else { 0.0 }, d.label))
                .map_err(|e| e.to_string()),
            Model::Fuzzy(system) => classify_fuzzy(system, attrs, DECISION_THRESHOLD)
                .map(|d| (d.score, d.label))
                .map_err(|e| e.to_string()),
            Model::Svm(model) => svm::predict(model, features).map_err(|e| e.to_string()),
        }
    }

    /// Score one customer at `anchor`, or `None` when the needed history is
    /// incomplete. The kernel machine consumes the `window`-month feature
    /// row; the others consume catalog attributes.
    fn score_customer(
        &self,
        series: &ConsumptionSeries,
        anchor: NaiveDate,
        window: usize,
        catalog: &AttributeCatalog,
    ) -> Result<Option<(f64, bool)>, String> {
        match self {
            Model::Svm(_) => match daily_average_features(series, window, anchor) {
                Some(row) => {
                    let no_attrs = AttributeVector::from(std::collections::BTreeMap::new());
                    self.score_row(&row, &no_attrs).map(Some)
                }
                None => Ok(None),
            },
            Model::Rules(_) | Model::Fuzzy(_) => match compute_attributes(series, anchor, catalog) {
                Some(attrs) => self.score_row(&[], &attrs).map(Some),
                None => Ok(None),
            },
        }
    }
}

/// Loads a saved model, telling the formats apart by content: rule text for
/// `.rules` files, otherwise JSON holding either a kernel machine (has a
/// `standardization` block) or a fuzzy system (has `variables`).
fn load_model(path: &Path, catalog: &AttributeCatalog) -> Result<Model, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::data(format!("cannot read {}: {e}", path.display())))?;
    let reject = |detail: &dyn std::fmt::Display| {
        AppError::data(format!("{}: {detail}", path.display()))
    };
    if path.extension().is_some_and(|ext| ext == "rules") {
        return parse_rules(&text, catalog).map(Model::Rules).map_err(|e| reject(&e));
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| reject(&e))?;
    if value.get("standardization").is_some() {
        SvmModel::from_json(&text).map(Model::Svm).map_err(|e| reject(&e))
    } else if value.get("variables").is_some() {
        serde_json::from_str(&text).map(Model::Fuzzy).map_err(|e| reject(&e))
    } else {
        Err(reject(
            &"unrecognized model format: expected rule text (.rules) or JSON \
              with a kernel machine or fuzzy system",
        ))
    }
}

// ---------------------------------------------------------------------------
// gen

/// Accepts partial generator configs: absent fields keep their defaults,
/// unknown fields are still rejected.
fn parse_synth_config(path: &Path) -> Result<SynthConfig, AppError> {
    let text = read_config_text(path)?;
    let user: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(SynthConfig::default()).expect("config serializes");
    match (merged.as_object_mut(), user) {
        (Some(base), serde_json::Value::Object(overrides)) => {
            for (key, value) in overrides {
                base.insert(key, value);
            }
        }
        _ => {
            return Err(AppError::usage(format!(
                "{}: generator config must be a JSON object",
                path.display()
            )))
        }
    }
    serde_json::from_value(merged).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))
}

fn gen(config: Option<&Path>, out: &Path, seed: Option<u64>) -> AppResult {
    let mut synth = match config {
        Some(path) => parse_synth_config(path)?,
        None => SynthConfig::default(),
    };
    synth.seed = resolve_seed(seed, synth.seed)?;
    let dataset = generate_synthetic(&synth).map_err(|e| AppError::usage(e.to_string()))?;
    create_out_dir(out)?;
    let consumption = out.join("consumption.csv");
    let inspections = out.join("inspections.csv");
    save_dataset(&dataset, &consumption, &inspections)
        .map_err(|e| AppError::data(e.to_string()))?;
    info!(
        "wrote {} customers, {} inspections ({} positive) to {}",
        dataset.series.len(),
        dataset.inspections.len(),
        dataset.positive_count(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// validate

fn validate(readings: &Path, inspections: &Path) -> AppResult {
    let dataset = match load_dataset(readings, inspections) {
        Ok(dataset) => dataset,
        Err(DataError::InvalidDataset(violations)) => {
            for violation in &violations {
                eprintln!("violation: {violation}");
            }
            return Err(AppError::data(format!("{} violation(s) found", violations.len())));
        }
        Err(err) => return Err(AppError::data(err.to_string())),
    };
    // Loading re-checks every invariant, so this pass is expected to come
    // back clean; it stays here so the command reports honestly if the two
    // ever disagree.
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        for violation in &violations {
            eprintln!("violation: {violation}");
        }
        return Err(AppError::data(format!("{} violation(s) found", violations.len())));
    }
    info!(
        "dataset ok: {} customers, {} inspections ({} positive, {} negative)",
        dataset.series.len(),
        dataset.inspections.len(),
        dataset.positive_count(),
        dataset.negative_count()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// features

fn features(readings: &Path, inspections: &Path, window: usize, out: &Path) -> AppResult {
    require_window(window)?;
    let dataset = load_data(readings, inspections)?;
    let build = build_feature_matrix(&dataset, window);
    let catalog = AttributeCatalog::shipped_default();
    let attrs = attributes_for_build(&dataset, &build, &catalog);
    create_out_dir(out)?;

    let mut features_csv = String::from("customer_id,label");
    for i in 1..=window {
        let _ = write!(features_csv, ",x_{i}");
    }
    features_csv.push('\n');
    for (i, id) in build.matrix.rows.iter().enumerate() {
        let _ = write!(features_csv, "{id},{}", u8::from(build.targets.labels[i]));
        for value in &build.matrix.values[i] {
            let _ = write!(features_csv, ",{value}");
        }
        features_csv.push('\n');
    }
    write_text(&out.join("features.csv"), &features_csv)?;

    let mut attributes_csv = String::from("customer_id,label");
    for name in catalog.names() {
        let _ = write!(attributes_csv, ",{name}");
    }
    attributes_csv.push('\n');
    let mut incomplete = 0usize;
    for (i, attr) in attrs.iter().enumerate() {
        let Some(attr) = attr else {
            incomplete += 1;
            continue;
        };
        let _ = write!(attributes_csv, "{},{}", build.matrix.rows[i], u8::from(build.targets.labels[i]));
        for name in catalog.names() {
            let value = attr.get(name).expect("catalog attribute present");
            let _ = write!(attributes_csv, ",{value}");
        }
        attributes_csv.push('\n');
    }
    write_text(&out.join("attributes.csv"), &attributes_csv)?;
    if incomplete > 0 {
        warn!(
            "{incomplete} row(s) missing from attributes.csv: the attribute history \
             ({} months) is longer than the feature window ({window})",
            catalog.required_window()
        );
    }

    let mut exclusions_csv = String::from("customer_id,reason\n");
    for exclusion in &build.exclusions {
        let _ = writeln!(exclusions_csv, "{},{}", exclusion.customer_id, exclusion.reason);
    }
    write_text(&out.join("exclusions.csv"), &exclusions_csv)?;

    info!(
        "wrote {} feature row(s), {} excluded customer(s) to {}",
        build.matrix.rows.len(),
        build.exclusions.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

/// Settings for `train`: where the data comes from, what to fit, and how the
/// pool is split.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    data: DataSource,
    classifier: ClassifierSpec,
    #[serde(default = "default_window")]
    window: usize,
    #[serde(default = "default_folds")]
    folds: usize,
    #[serde(default)]
    ratios: SplitRatios,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_window() -> usize {
    12
}

fn default_folds() -> usize {
    10
}

fn default_seed() -> u64 {
    42
}

/// A classifier spec with its text parsed and its config checked.
enum PreparedSpec<'a> {
    Boolean { rules: RuleSet },
    Fuzzy { rules: RuleSet, sgd: &'a SgdConfig },
    Svm { config: &'a SvmConfig },
}

fn prepare_spec<'a>(
    spec: &'a ClassifierSpec,
    catalog: &AttributeCatalog,
) -> Result<PreparedSpec<'a>, AppError> {
    let bad = |e: &dyn std::fmt::Display| {
        AppError::usage(format!("classifier {}: {e}", spec.name()))
    };
    match spec {
        ClassifierSpec::Boolean { rules, .. } => {
            parse_rules(rules.as_deref().unwrap_or(EXAMPLE_RULES), catalog)
                .map(|rules| PreparedSpec::Boolean { rules })
                .map_err(|e| bad(&e))
        }
        ClassifierSpec::Fuzzy { rules, sgd, .. } => {
            parse_rules(rules.as_deref().unwrap_or(EXAMPLE_RULES), catalog)
                .map(|rules| PreparedSpec::Fuzzy { rules, sgd })
                .map_err(|e| bad(&e))
        }
        ClassifierSpec::Svm { config, .. } => {
            config.validate().map_err(|e| bad(&e))?;
            Ok(PreparedSpec::Svm { config })
        }
    }
}

#[derive(Serialize)]
struct TrainReport {
    classifier: String,
    model_file: String,
    examples: usize,
    positives: usize,
    negatives: usize,
    window: usize,
    selected_fold: usize,
    validation_auc: f64,
    folds: Vec<FoldReport>,
    test_confusion: ConfusionMatrix,
    test_metrics: CellMetrics,
}

fn train(config_path: &Path, out: &Path, seed: Option<u64>) -> AppResult {
    let mut config: TrainConfig = parse_config(config_path)?;
    require_window(config.window)?;
    if config.folds == 0 {
        return Err(AppError::usage("folds must be at least 1"));
    }
    config.seed = resolve_seed(seed, config.seed)?;

    let catalog = AttributeCatalog::shipped_default();
    let prepared = prepare_spec(&config.classifier, &catalog)?;
    let dataset = load_source(&config.data)?;
    let pool = build_pool(&dataset, config.window, &catalog)?;
    info!(
        "training {} on {} examples ({} positive), {} repeated split(s)",
        config.classifier.name(),
        pool.labels.len(),
        pool.positives(),
        config.folds
    );

    let classifier_err = |e: &dyn std::fmt::Display| EvalError::Classifier(e.to_string());
    let trainer = |_fold: usize, train: &[usize], validation: &[usize]| -> Result<Model, EvalError> {
        match &prepared {
            PreparedSpec::Boolean { rules } => Ok(Model::Rules(rules.clone())),
            PreparedSpec::Fuzzy { rules, sgd } => {
                let pairs = |part: &[usize]| -> Vec<(AttributeVector, bool)> {
                    part.iter().map(|&i| (pool.attributes[i].clone(), pool.labels[i])).collect()
                };
                let train_pairs = pairs(train);
                let train_attrs: Vec<AttributeVector> =
                    train_pairs.iter().map(|(a, _)| a.clone()).collect();
                let stats = attribute_stats(&train_attrs, &catalog);
                let system = fuzzify_ruleset(rules, &stats).map_err(|e| classifier_err(&e))?;
                let outcome = sgd_optimize(&system, &train_pairs, &pairs(validation), sgd)
                    .map_err(|e| classifier_err(&e))?;
                Ok(Model::Fuzzy(outcome.system))
            }
            PreparedSpec::Svm { config } => {
                let rows = |part: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
                    (
                        part.iter().map(|&i| pool.features[i].clone()).collect(),
                        part.iter().map(|&i| pool.labels[i]).collect(),
                    )
                };
                let (train_rows, train_labels) = rows(train);
                let (val_rows, val_labels) = rows(validation);
                let (model, _c) =
                    svm::train_svm_selected(&train_rows, &train_labels, &val_rows, &val_labels, config)
                        .map_err(|e| classifier_err(&e))?;
                Ok(Model::Svm(model))
            }
        }
    };
    let predictor = |model: &Model, part: &[usize]| -> Result<Vec<bool>, EvalError> {
        part.iter()
            .map(|&i| {
                model
                    .score_row(&pool.features[i], &pool.attributes[i])
                    .map(|(_, label)| label)
                    .map_err(EvalError::Classifier)
            })
            .collect()
    };

    let outcome = cross_validate(&pool.labels, config.folds, &config.ratios, config.seed, trainer, predictor)
        .map_err(eval_err)?;

    create_out_dir(out)?;
    let name = config.classifier.name();
    let model_file = outcome.model.file_name(&format!("model_{name}"));
    outcome.model.save(&out.join(&model_file))?;
    let report = TrainReport {
        classifier: name,
        model_file,
        examples: pool.labels.len(),
        positives: pool.positives(),
        negatives: pool.labels.len() - pool.positives(),
        window: config.window,
        selected_fold: outcome.selected_fold,
        validation_auc: outcome.validation_auc,
        folds: outcome.folds.clone(),
        test_confusion: outcome.test_confusion,
        test_metrics: CellMetrics::from_confusion(&outcome.test_confusion),
    };
    write_json(&out.join("train_report.json"), &report)?;
    info!(
        "selected split {} (validation AUC {:.3}); model and train_report.json written to {}",
        outcome.selected_fold,
        outcome.validation_auc,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// score

fn score(readings: &Path, inspections: &Path, model_path: &Path, window: usize, out: &Path) -> AppResult {
    require_window(window)?;
    let catalog = AttributeCatalog::shipped_default();
    let model = load_model(model_path, &catalog)?;
    let dataset = load_data(readings, inspections)?;

    let mut rows: Vec<(CustomerId, f64, bool)> = Vec::new();
    let mut skipped = 0usize;
    for id in dataset.uninspected_customers() {
        let series = &dataset.series[id];
        // The scoring anchor is the day after the newest reading, so the
        // window ends with the last fully recorded month.
        let anchor = series
            .readings
            .last()
            .and_then(|reading| reading.reading_date.succ_opt());
        let scored = match anchor {
            Some(anchor) => model
                .score_customer(series, anchor, window, &catalog)
                .map_err(|e| AppError::data(format!("customer {id}: {e}")))?,
            None => None,
        };
        match scored {
            Some((score, label)) => rows.push((id.clone(), score, label)),
            None => skipped += 1,
        }
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    create_out_dir(out)?;
    let mut csv = String::from("customer_id,score,label\n");
    for (id, score, label) in &rows {
        let _ = writeln!(csv, "{id},{score},{}", u8::from(*label));
    }
    write_text(&out.join("scores.csv"), &csv)?;
    if skipped > 0 {
        warn!("{skipped} customer(s) skipped: history incomplete for the scoring window");
    }
    info!(
        "scored {} customer(s) with the {} model; ranking written to {}",
        rows.len(),
        model.kind(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Serialize)]
struct EvaluationReport {
    model_file: String,
    model_kind: String,
    window: usize,
    examples: usize,
    positives: usize,
    negatives: usize,
    confusion: ConfusionMatrix,
    metrics: CellMetrics,
}

fn evaluate(readings: &Path, inspections: &Path, model_path: &Path, window: usize, out: &Path) -> AppResult {
    require_window(window)?;
    let catalog = AttributeCatalog::shipped_default();
    let model = load_model(model_path, &catalog)?;
    let dataset = load_data(readings, inspections)?;
    let pool = build_pool(&dataset, window, &catalog)?;

    let predictions: Vec<bool> = pool
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            model
                .score_row(&pool.features[i], &pool.attributes[i])
                .map(|(_, label)| label)
                .map_err(|e| AppError::data(format!("customer {id}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let cm = confusion(&predictions, &pool.labels).map_err(eval_err)?;
    let metrics = CellMetrics::from_confusion(&cm);

    create_out_dir(out)?;
    let report = EvaluationReport {
        model_file: model_path.display().to_string(),
        model_kind: model.kind().to_string(),
        window,
        examples: pool.labels.len(),
        positives: pool.positives(),
        negatives: pool.labels.len() - pool.positives(),
        confusion: cm,
        metrics,
    };
    write_json(&out.join("evaluation.json"), &report)?;
    let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    info!(
        "evaluated {} example(s): accuracy {}, AUC {}; evaluation.json written to {}",
        pool.labels.len(),
        show(report.metrics.accuracy),
        show(report.metrics.auc),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

#[allow(clippy::too_many_arguments)]
fn sweep(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
    levels: Option<Vec<f64>>,
    target_size: Option<usize>,
    window: Option<usize>,
) -> AppResult {
    let text = read_config_text(config_path)?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| AppError::usage(format!("{}: {e}", config_path.display())))?;
    if let Some(levels) = levels {
        config.levels = levels
            .into_iter()
            .map(ProportionLevel::new)
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::usage(e.to_string()))?;
    }
    if let Some(target_size) = target_size {
        config.target_size = target_size;
    }
    if let Some(window) = window {
        config.window = window;
    }
    config.master_seed = resolve_seed(seed, config.master_seed)?;
    let out_dir = out
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| AppError::usage("no output directory: pass --out or set output_dir in the config"))?;
    config.validate().map_err(eval_err)?;

    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| AppError::usage(format!("cannot size the worker pool: {e}")))?;
    }
    info!(
        "sweeping {} classifier(s) across {} level(s), target {} examples per cell",
        config.classifiers.len(),
        config.levels.len(),
        config.target_size
    );
    let output = run_experiment(&config).map_err(eval_err)?;
    write_experiment_outputs(&output, &out_dir)
        .map_err(|e| AppError::data(format!("cannot write {}: {e}", out_dir.display())))?;
    info!(
        "wrote report.json, curves.csv, and {} model file(s) to {}",
        output.models.len(),
        out_dir.display()
    );
    Ok(())
}
