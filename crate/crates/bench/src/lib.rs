//! Deterministic fixtures for the pipeline benchmarks, shaped like the real
//! workload: a synthetic dataset, the labeled pool built from it, and a
//! compiled fuzzy system.

use ntlbench_core::data::{generate_synthetic, SynthConfig};
use ntlbench_core::domain::Dataset;
use ntlbench_core::features::{
    attribute_stats, attributes_for_build, build_feature_matrix, AttributeCatalog,
    AttributeVector,
};
use ntlbench_core::fuzzy::{fuzzify_ruleset, FuzzySystem};
use ntlbench_core::rules::{parse_rules, EXAMPLE_RULES};

pub fn dataset(n_customers: usize) -> Dataset {
    let config = SynthConfig {
        n_customers,
        months: 15,
        ntl_fraction: 0.3,
        seed: 42,
        ..SynthConfig::default()
    };
    generate_synthetic(&config).expect("fixture config is valid")
}

/// Feature rows, attribute vectors, and labels for every inspected customer.
pub struct LabeledPool {
    pub features: Vec<Vec<f64>>,
    pub attributes: Vec<AttributeVector>,
    pub labels: Vec<bool>,
}

pub fn labeled_pool(n_customers: usize) -> LabeledPool {
    let data = dataset(n_customers);
    let build = build_feature_matrix(&data, 12);
    let catalog = AttributeCatalog::shipped_default();
    let attrs = attributes_for_build(&data, &build, &catalog);
    let mut pool = LabeledPool { features: Vec::new(), attributes: Vec::new(), labels: Vec::new() };
    for (i, attr) in attrs.into_iter().enumerate() {
        let attr = attr.expect("fixture window covers the catalog");
        pool.features.push(build.matrix.values[i].clone());
        pool.attributes.push(attr);
        pool.labels.push(build.targets.labels[i]);
    }
    pool
}

/// The shipped rule set fuzzified against the pool's attribute spread.
pub fn compiled_system(pool: &LabeledPool) -> FuzzySystem {
    let catalog = AttributeCatalog::shipped_default();
    let rules = parse_rules(EXAMPLE_RULES, &catalog).expect("shipped rules parse");
    let stats = attribute_stats(&pool.attributes, &catalog);
    fuzzify_ruleset(&rules, &stats).expect("shipped rules compile")
}
