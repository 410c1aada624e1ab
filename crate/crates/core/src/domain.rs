//! Core value types shared by every stage of the pipeline: meter readings,
//! consumption series, inspection results and the dataset that bundles them.
//!
//! All types are plain immutable data. [`validate_dataset`] reports invariant
//! violations as values instead of failing, so callers can collect and display
//! every offender in one pass.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Opaque customer identifier.
///
/// Restricted to `[A-Za-z0-9_-]` so identifiers survive unquoted CSV fields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CustomerId(String);

impl CustomerId {
    pub fn new(id: impl Into<String>) -> Self {
        CustomerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the identifier is non-empty and uses only `[A-Za-z0-9_-]`.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty()
            && self
                .0
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
    }
}

impl fmt::Display for CustomerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CustomerId {
    fn from(s: &str) -> Self {
        CustomerId(s.to_owned())
    }
}

/// One monthly meter reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterReading {
    pub reading_date: NaiveDate,
    /// kWh consumed since the previous reading.
    pub kwh_increase: f64,
    /// Days elapsed since the previous reading.
    pub days_since_prev: u32,
}

/// Ordered monthly readings for one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionSeries {
    pub customer_id: CustomerId,
    pub readings: Vec<MeterReading>,
}

/// Outcome of one on-site inspection. `ntl_detected` is the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionResult {
    pub customer_id: CustomerId,
    pub inspection_date: NaiveDate,
    pub ntl_detected: bool,
}

/// Consumption series keyed by customer plus the inspection ledger.
///
/// The map is ordered so every iteration over customers is deterministic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub series: BTreeMap<CustomerId, ConsumptionSeries>,
    pub inspections: Vec<InspectionResult>,
}

impl Dataset {
    pub fn positive_count(&self) -> usize {
        self.inspections.iter().filter(|i| i.ntl_detected).count()
    }

    pub fn negative_count(&self) -> usize {
        self.inspections.len() - self.positive_count()
    }

    /// Most recent inspection per customer; ties broken by ledger position
    /// (the later entry wins).
    pub fn latest_inspections(&self) -> BTreeMap<&CustomerId, &InspectionResult> {
        let mut latest: BTreeMap<&CustomerId, &InspectionResult> = BTreeMap::new();
        for insp in &self.inspections {
            match latest.get(&insp.customer_id) {
                Some(prev) if prev.inspection_date > insp.inspection_date => {}
                _ => {
                    latest.insert(&insp.customer_id, insp);
                }
            }
        }
        latest
    }

    /// Customers that have a series but no inspection (scoring targets).
    pub fn uninspected_customers(&self) -> Vec<&CustomerId> {
        let inspected: std::collections::BTreeSet<&CustomerId> =
            self.inspections.iter().map(|i| &i.customer_id).collect();
        self.series
            .keys()
            .filter(|id| !inspected.contains(id))
            .collect()
    }
}

/// A broken invariant, naming the offending customer where one exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub customer_id: Option<CustomerId>,
    pub description: String,
}

impl Violation {
    fn for_customer(id: &CustomerId, description: impl Into<String>) -> Self {
        Violation {
            customer_id: Some(id.clone()),
            description: description.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.customer_id {
            Some(id) => write!(f, "customer {}: {}", id, self.description),
            None => f.write_str(&self.description),
        }
    }
}

fn month_index(date: NaiveDate) -> i32 {
    date.year() * 12 + date.month0() as i32
}

/// Checks every type invariant and returns one entry per breach.
///
/// Idempotent and side-effect free; an empty result means the dataset is
/// accepted by every downstream precondition.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut violations = Vec::new();

    for (id, series) in &dataset.series {
        if !id.is_well_formed() {
            violations.push(Violation::for_customer(
                id,
                "identifier must be non-empty and use only [A-Za-z0-9_-]",
            ));
        }
        if series.customer_id != *id {
            violations.push(Violation::for_customer(
                id,
                format!(
                    "series is keyed under {id} but carries customer_id {}",
                    series.customer_id
                ),
            ));
        }

        let mut prev: Option<&MeterReading> = None;
        for reading in &series.readings {
            if !(reading.kwh_increase >= 0.0 && reading.kwh_increase.is_finite()) {
                violations.push(Violation::for_customer(
                    id,
                    format!(
                        "reading {} has kwh_increase {} (must be finite and >= 0)",
                        reading.reading_date, reading.kwh_increase
                    ),
                ));
            }
            if reading.days_since_prev < 1 {
                violations.push(Violation::for_customer(
                    id,
                    format!(
                        "reading {} has days_since_prev 0 (must be >= 1)",
                        reading.reading_date
                    ),
                ));
            }
            if let Some(prev) = prev {
                if reading.reading_date <= prev.reading_date {
                    violations.push(Violation::for_customer(
                        id,
                        format!(
                            "reading dates not strictly increasing: {} follows {}",
                            reading.reading_date, prev.reading_date
                        ),
                    ));
                } else {
                    if month_index(reading.reading_date) == month_index(prev.reading_date) {
                        violations.push(Violation::for_customer(
                            id,
                            format!(
                                "duplicate reading in month {}",
                                reading.reading_date.format("%Y-%m")
                            ),
                        ));
                    }
                    let gap = (reading.reading_date - prev.reading_date).num_days();
                    if i64::from(reading.days_since_prev) != gap {
                        violations.push(Violation::for_customer(
                            id,
                            format!(
                                "reading {} stores days_since_prev {} but the calendar gap is {gap}",
                                reading.reading_date, reading.days_since_prev
                            ),
                        ));
                    }
                }
            }
            prev = Some(reading);
        }
    }

    for insp in &dataset.inspections {
        if !dataset.series.contains_key(&insp.customer_id) {
            violations.push(Violation::for_customer(
                &insp.customer_id,
                "inspection references a customer with no consumption series",
            ));
        }
    }

    violations
}
