//! Non-technical-loss (NTL) detection for monthly electricity consumption.
//!
//! The crate covers the full study pipeline:
//!
//! * [`domain`] — meter readings, inspection results and dataset validation;
//! * [`data`] — CSV import/export and a seeded synthetic generator;
//! * [`features`] — daily-average consumption features and derived attributes;
//! * [`rules`] — a small Boolean rule language over attributes;
//! * [`fuzzy`] — a Mamdani system compiled from Boolean rules, with
//!   gradient-based membership tuning;
//! * [`svm`] — linear (stochastic subgradient) and RBF (SMO) support vector
//!   machines;
//! * [`resample`] — stratified subsampling to a target class balance;
//! * [`eval`] — confusion-matrix metrics, shuffled-split model selection and
//!   the balance-sweep experiment harness.

pub mod data;
pub mod domain;
pub mod eval;
pub mod features;
pub mod fuzzy;
pub mod resample;
pub mod rules;
pub mod svm;

pub use domain::{
    ConsumptionSeries, CustomerId, Dataset, InspectionResult, MeterReading, Violation,
    validate_dataset,
};
