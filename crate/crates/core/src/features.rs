//! Daily-average consumption features and the named attributes derived from
//! them.
//!
//! The feature for month `d` of customer `m` is
//! `x_d = L_d / (R_d − R_{d−1})` — consumed kWh divided by the days between
//! readings — taken over the `N` calendar months immediately preceding the
//! anchor month (the anchor month itself is excluded). A customer missing any
//! of those months is *incomplete* and is filtered out rather than imputed.
//!
//! Attributes are scalar summaries of the trailing daily-average sequence
//! (mean, spread, recent change, slope, …) addressed by name; the shipped
//! catalog is [`AttributeCatalog::shipped_default`] and users can load their
//! own as JSON.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ConsumptionSeries, CustomerId, Dataset};

/// Calendar month counter: consecutive months differ by exactly 1.
pub(crate) fn month_index(date: NaiveDate) -> i32 {
    date.year() * 12 + date.month0() as i32
}

/// Daily-average kWh for the `window` months before `anchor`, oldest first,
/// or `None` if any of those months lacks a reading.
pub fn daily_average_features(
    series: &ConsumptionSeries,
    window: usize,
    anchor: NaiveDate,
) -> Option<Vec<f64>> {
    assert!(window >= 1, "window must be at least one month");
    let by_month: BTreeMap<i32, &crate::domain::MeterReading> = series
        .readings
        .iter()
        .map(|r| (month_index(r.reading_date), r))
        .collect();
    let anchor_idx = month_index(anchor);
    let start = anchor_idx - window as i32;
    (start..anchor_idx)
        .map(|mi| {
            by_month
                .get(&mi)
                .map(|r| r.kwh_increase / f64::from(r.days_since_prev))
        })
        .collect()
}

/// Feature rows (one per retained customer, ascending id) over a fixed
/// month window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<CustomerId>,
    pub window: usize,
    /// `rows.len() × window` daily averages, kWh/day.
    pub values: Vec<Vec<f64>>,
}

/// Binary labels aligned with [`FeatureMatrix::rows`]; `true` = NTL found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetVector {
    pub labels: Vec<bool>,
}

/// Why a customer contributed no feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    /// No inspection on record, so no label and no anchor.
    NoInspection,
    /// A month in the feature window has no reading.
    IncompleteWindow,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::NoInspection => f.write_str("no inspection on record"),
            ExclusionReason::IncompleteWindow => f.write_str("incomplete feature window"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub customer_id: CustomerId,
    pub reason: ExclusionReason,
}

/// Everything produced by [`build_feature_matrix`]: the retained rows, their
/// labels and anchor dates, and the customers that were filtered out.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBuild {
    pub matrix: FeatureMatrix,
    pub targets: TargetVector,
    /// Per-row inspection date (the window anchor).
    pub anchors: Vec<NaiveDate>,
    pub exclusions: Vec<Exclusion>,
}

/// One row per customer with a complete `window`-month series before their
/// most recent inspection; that inspection's outcome is the label.
pub fn build_feature_matrix(dataset: &Dataset, window: usize) -> FeatureBuild {
    let latest = dataset.latest_inspections();
    let mut matrix = FeatureMatrix {
        rows: Vec::new(),
        window,
        values: Vec::new(),
    };
    let mut targets = TargetVector { labels: Vec::new() };
    let mut anchors = Vec::new();
    let mut exclusions = Vec::new();

    for (id, series) in &dataset.series {
        let Some(inspection) = latest.get(id) else {
            exclusions.push(Exclusion {
                customer_id: id.clone(),
                reason: ExclusionReason::NoInspection,
            });
            continue;
        };
        match daily_average_features(series, window, inspection.inspection_date) {
            Some(row) => {
                matrix.rows.push(id.clone());
                matrix.values.push(row);
                targets.labels.push(inspection.ntl_detected);
                anchors.push(inspection.inspection_date);
            }
            None => exclusions.push(Exclusion {
                customer_id: id.clone(),
                reason: ExclusionReason::IncompleteWindow,
            }),
        }
    }

    FeatureBuild {
        matrix,
        targets,
        anchors,
        exclusions,
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog must define at least one attribute")]
    Empty,
    #[error("duplicate attribute name `{0}`")]
    DuplicateName(String),
    #[error("attribute name `{0}` must match [A-Za-z_][A-Za-z0-9_]*")]
    BadName(String),
    #[error("attribute `{name}`: {message}")]
    BadParams { name: String, message: String },
    #[error("catalog JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// How one attribute is computed from the trailing daily-average sequence.
/// All windows are in months, counted back from the anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "definition_id", content = "params", rename_all = "snake_case")]
pub enum AttributeDefinition {
    /// Mean of the last `window` values.
    Mean { window: usize },
    /// Population standard deviation of the last `window` values.
    Std { window: usize },
    /// Mean of the last `recent` values relative to the mean of the `prior`
    /// values before them: `(m_r − m_p) / m_p`. Both zero → 0; only the
    /// prior zero → +1.
    RecentChange { recent: usize, prior: usize },
    /// Least-squares line slope over the last `window` values, per month.
    Slope { window: usize },
    /// Minimum divided by mean of the last `window` values; 1 when the mean
    /// is 0 (a flat all-zero stretch is not a dip).
    MinOverMean { window: usize },
    /// Number of exactly-zero values among the last `window`.
    ZeroMonths { window: usize },
}

impl AttributeDefinition {
    /// Trailing months this definition needs.
    pub fn required_window(&self) -> usize {
        match *self {
            AttributeDefinition::Mean { window }
            | AttributeDefinition::Std { window }
            | AttributeDefinition::Slope { window }
            | AttributeDefinition::MinOverMean { window }
            | AttributeDefinition::ZeroMonths { window } => window,
            AttributeDefinition::RecentChange { recent, prior } => recent + prior,
        }
    }

    /// Evaluates on the trailing slice (`values.len() >= required_window()`).
    fn evaluate(&self, values: &[f64]) -> f64 {
        let tail = &values[values.len() - self.required_window()..];
        match *self {
            AttributeDefinition::Mean { .. } => mean(tail),
            AttributeDefinition::Std { .. } => {
                let m = mean(tail);
                (tail.iter().map(|v| (v - m).powi(2)).sum::<f64>() / tail.len() as f64).sqrt()
            }
            AttributeDefinition::RecentChange { recent, .. } => {
                let m_recent = mean(&tail[tail.len() - recent..]);
                let m_prior = mean(&tail[..tail.len() - recent]);
                if m_prior == 0.0 {
                    if m_recent == 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    (m_recent - m_prior) / m_prior
                }
            }
            AttributeDefinition::Slope { .. } => {
                let n = tail.len() as f64;
                let x_mean = (n - 1.0) / 2.0;
                let y_mean = mean(tail);
                let mut num = 0.0;
                let mut den = 0.0;
                for (i, y) in tail.iter().enumerate() {
                    let dx = i as f64 - x_mean;
                    num += dx * (y - y_mean);
                    den += dx * dx;
                }
                if den == 0.0 {
                    0.0
                } else {
                    num / den
                }
            }
            AttributeDefinition::MinOverMean { .. } => {
                let m = mean(tail);
                if m == 0.0 {
                    1.0
                } else {
                    tail.iter().copied().fold(f64::INFINITY, f64::min) / m
                }
            }
            AttributeDefinition::ZeroMonths { .. } => {
                tail.iter().filter(|v| **v == 0.0).count() as f64
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), CatalogError> {
        let bad = |message: &str| {
            Err(CatalogError::BadParams {
                name: name.to_owned(),
                message: message.to_owned(),
            })
        };
        match *self {
            AttributeDefinition::RecentChange { recent, prior } => {
                if recent == 0 || prior == 0 {
                    return bad("recent and prior must both be >= 1");
                }
            }
            AttributeDefinition::Slope { window } => {
                if window < 2 {
                    return bad("slope needs a window of at least 2");
                }
            }
            _ => {
                if self.required_window() == 0 {
                    return bad("window must be >= 1");
                }
            }
        }
        Ok(())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub definition: AttributeDefinition,
}

/// Ordered, validated list of attribute definitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AttributeSpec>", into = "Vec<AttributeSpec>")]
pub struct AttributeCatalog {
    specs: Vec<AttributeSpec>,
}

impl TryFrom<Vec<AttributeSpec>> for AttributeCatalog {
    type Error = CatalogError;

    fn try_from(specs: Vec<AttributeSpec>) -> Result<Self, CatalogError> {
        if specs.is_empty() {
            return Err(CatalogError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &specs {
            let mut chars = spec.name.chars();
            let head_ok = chars
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
            if !head_ok || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CatalogError::BadName(spec.name.clone()));
            }
            if !seen.insert(spec.name.as_str()) {
                return Err(CatalogError::DuplicateName(spec.name.clone()));
            }
            spec.definition.validate(&spec.name)?;
        }
        Ok(AttributeCatalog { specs })
    }
}

impl From<AttributeCatalog> for Vec<AttributeSpec> {
    fn from(catalog: AttributeCatalog) -> Self {
        catalog.specs
    }
}

impl AttributeCatalog {
    pub fn new(specs: Vec<AttributeSpec>) -> Result<Self, CatalogError> {
        Self::try_from(specs)
    }

    /// The six-attribute default catalog.
    pub fn shipped_default() -> Self {
        let spec = |name: &str, definition| AttributeSpec {
            name: name.to_owned(),
            definition,
        };
        AttributeCatalog::new(vec![
            spec("mean_12m", AttributeDefinition::Mean { window: 12 }),
            spec("std_12m", AttributeDefinition::Std { window: 12 }),
            spec(
                "change_3m",
                AttributeDefinition::RecentChange { recent: 3, prior: 9 },
            ),
            spec("slope_12m", AttributeDefinition::Slope { window: 12 }),
            spec(
                "min_over_mean",
                AttributeDefinition::MinOverMean { window: 12 },
            ),
            spec("zero_month_count", AttributeDefinition::ZeroMonths { window: 12 }),
        ])
        .expect("shipped catalog is valid")
    }

    pub fn specs(&self) -> &[AttributeSpec] {
        &self.specs
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.specs.iter().any(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Trailing months needed to evaluate every attribute.
    pub fn required_window(&self) -> usize {
        self.specs
            .iter()
            .map(|s| s.definition.required_window())
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.specs).expect("catalog serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let specs: Vec<AttributeSpec> = serde_json::from_str(text)?;
        AttributeCatalog::new(specs)
    }
}

/// Named attribute values; contains every catalog attribute exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeVector {
    values: BTreeMap<String, f64>,
}

impl AttributeVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl From<BTreeMap<String, f64>> for AttributeVector {
    fn from(values: BTreeMap<String, f64>) -> Self {
        AttributeVector { values }
    }
}

/// Evaluates every catalog attribute, or `None` when the catalog's trailing
/// window is incomplete before `anchor`.
pub fn compute_attributes(
    series: &ConsumptionSeries,
    anchor: NaiveDate,
    catalog: &AttributeCatalog,
) -> Option<AttributeVector> {
    let window = catalog.required_window();
    let features = daily_average_features(series, window, anchor)?;
    let values = catalog
        .specs
        .iter()
        .map(|s| (s.name.clone(), s.definition.evaluate(&features)))
        .collect();
    Some(AttributeVector { values })
}

/// Attribute vectors for each feature-matrix row, in row order. `None` marks
/// rows whose catalog window is longer than the matrix window and incomplete.
pub fn attributes_for_build(
    dataset: &Dataset,
    build: &FeatureBuild,
    catalog: &AttributeCatalog,
) -> Vec<Option<AttributeVector>> {
    build
        .matrix
        .rows
        .iter()
        .zip(&build.anchors)
        .map(|(id, anchor)| compute_attributes(&dataset.series[id], *anchor, catalog))
        .collect()
}

/// Five-number spread of one attribute over a population (quantiles use the
/// linear-interpolation convention; single value ⇒ all five equal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl AttributeStats {
    /// `values` must be non-empty and finite.
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "stats need at least one value");
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let quantile = |p: f64| -> f64 {
            let h = (sorted.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        AttributeStats {
            min: sorted[0],
            q1: quantile(0.25),
            median: quantile(0.5),
            q3: quantile(0.75),
            max: sorted[sorted.len() - 1],
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-attribute spread across a population of attribute vectors.
pub fn attribute_stats(
    rows: &[AttributeVector],
    catalog: &AttributeCatalog,
) -> BTreeMap<String, AttributeStats> {
    catalog
        .names()
        .map(|name| {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.get(name)).collect();
            (name.to_owned(), AttributeStats::from_values(&values))
        })
        .collect()
}
