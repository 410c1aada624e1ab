//! Mamdani fuzzy classification: membership functions, crisp-rule
//! fuzzification, inference, and stochastic-gradient tuning of membership
//! parameters.
//!
//! The submodules split along the pipeline:
//! - [`membership`]: trapezoid / sigmoid membership functions and the
//!   order-restoring projection used after gradient steps,
//! - [`system`]: the system structure plus inference and defuzzification,
//! - [`compile`]: translation of crisp boolean rules into an equivalent
//!   initial fuzzy system,
//! - [`sgd`]: minibatch finite-difference gradient descent on the
//!   membership parameters.

mod compile;
mod membership;
mod sgd;
mod system;

pub use compile::fuzzify_ruleset;
pub use membership::{isotonic_projection, MembershipFunction, MIN_STEEPNESS};
pub use sgd::{sgd_optimize, sgd_optimize_with_observer, EpochStats, SgdConfig, SgdOutcome};
pub use system::{
    classify_fuzzy, defuzzify_centroid, default_output, mamdani_infer, AntecedentTerm,
    FuzzyDecision, FuzzyRule, FuzzySystem, FuzzyVariable, LabeledFunction, OutputConfig,
    OutputLabel, DEFAULT_GRID_RESOLUTION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("attribute vector is missing \"{0}\"")]
    MissingAttribute(String),
    #[error("attribute \"{0}\" has a non-finite value")]
    NonFiniteAttribute(String),
    #[error("rule \"{rule}\" references unknown label \"{label}\" of attribute \"{attribute}\"")]
    UnknownLabel {
        rule: String,
        attribute: String,
        label: String,
    },
    #[error(
        "attribute \"{attribute}\" has {count} membership functions; only 1, 2 or 4 are supported"
    )]
    UnsupportedFunctionCount { attribute: String, count: usize },
    #[error("no value statistics available for attribute \"{0}\"")]
    MissingStats(String),
    #[error("output membership supports do not cover [0,1]")]
    OutputNotCovering,
    #[error("invalid membership function: {0}")]
    InvalidMembership(String),
    #[error("defuzzification grid needs at least 2 points, got {0}")]
    InvalidGrid(usize),
    #[error("invalid optimizer configuration: {0}")]
    InvalidSgdConfig(String),
    #[error("validation set contains a single class; AUC-based selection is undefined")]
    SingleClassValidation,
    #[error("training requires at least one example")]
    EmptyTraining,
}
