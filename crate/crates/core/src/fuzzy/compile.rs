//! Translation of crisp boolean rules into an initial fuzzy system.
//!
//! Every distinct inequality threshold on an attribute becomes a
//! complementary sigmoid pair crossing 0.5 exactly at the threshold; every
//! equality value becomes a "near" trapezoid centered on it. Ramp widths come
//! from the attribute's interquartile range, so the softness of each boundary
//! reflects the spread of observed values.

use std::collections::{BTreeMap, BTreeSet};

use super::membership::MembershipFunction;
use super::system::{
    default_output, AntecedentTerm, FuzzyRule, FuzzySystem, FuzzyVariable, LabeledFunction,
    OutputLabel, DEFAULT_GRID_RESOLUTION,
};
use super::FuzzyError;
use crate::features::AttributeStats;
use crate::rules::{Comparator, RuleSet};

/// Name of the synthesized rule that concludes no-NTL when every inequality
/// boundary sits on its unsuspicious side. Without it the system would emit
/// 0.5 for every normal-looking customer instead of a low score.
pub const BASELINE_RULE_NAME: &str = "no_ntl_baseline";

/// Half-width of the transition zone around a crisp threshold.
fn ramp_width(stats: &AttributeStats) -> f64 {
    let mut w = 0.5 * stats.iqr();
    if !(w.is_finite() && w > 0.0) {
        w = 0.5 * stats.range();
    }
    if !(w.is_finite() && w > 0.0) {
        w = 1.0;
    }
    w
}

/// Sorted, deduplicated threshold lists one attribute accumulates across the
/// whole rule set.
#[derive(Default)]
struct ThresholdPlan {
    inequalities: Vec<f64>,
    equalities: Vec<f64>,
}

fn push_sorted(values: &mut Vec<f64>, v: f64) {
    match values.binary_search_by(|x| x.partial_cmp(&v).expect("finite threshold")) {
        Ok(_) => {}
        Err(pos) => values.insert(pos, v),
    }
}

fn indexed(base: &str, i: usize, n: usize) -> String {
    if n == 1 {
        base.to_owned()
    } else {
        format!("{base}_{i}")
    }
}

/// Builds the fuzzy counterpart of `ruleset`. Each crisp rule becomes a rule
/// concluding NTL (a `!=` term expands the rule into a below/above variant
/// pair), and one extra baseline rule concludes no-NTL from the complements
/// of every inequality label the NTL rules use.
pub fn fuzzify_ruleset(
    ruleset: &RuleSet,
    stats: &BTreeMap<String, AttributeStats>,
) -> Result<FuzzySystem, FuzzyError> {
    let mut plans: BTreeMap<&str, ThresholdPlan> = BTreeMap::new();
    for rule in &ruleset.rules {
        for term in &rule.terms {
            let plan = plans.entry(term.attribute.as_str()).or_default();
            match term.comparator {
                Comparator::Eq => push_sorted(&mut plan.equalities, term.value),
                _ => push_sorted(&mut plan.inequalities, term.value),
            }
        }
    }

    let mut variables = Vec::new();
    for (&attribute, plan) in &plans {
        let count = 2 * plan.inequalities.len() + plan.equalities.len();
        if !matches!(count, 1 | 2 | 4) {
            return Err(FuzzyError::UnsupportedFunctionCount {
                attribute: attribute.to_owned(),
                count,
            });
        }
        let attr_stats = stats
            .get(attribute)
            .ok_or_else(|| FuzzyError::MissingStats(attribute.to_owned()))?;
        let w = ramp_width(attr_stats);
        // Steepness 4/w matches the center slope of a width-w linear ramp,
        // and the ± pair sums to exactly 1 everywhere.
        let steepness = 4.0 / w;
        let mut functions = Vec::new();
        for (i, &v) in plan.inequalities.iter().enumerate() {
            functions.push(LabeledFunction {
                label: indexed("low", i, plan.inequalities.len()),
                mf: MembershipFunction::Sigmoid { center: v, steepness: -steepness },
            });
            functions.push(LabeledFunction {
                label: indexed("high", i, plan.inequalities.len()),
                mf: MembershipFunction::Sigmoid { center: v, steepness },
            });
        }
        for (i, &v) in plan.equalities.iter().enumerate() {
            functions.push(LabeledFunction {
                label: indexed("near", i, plan.equalities.len()),
                mf: MembershipFunction::Trapezoid {
                    a: v - w,
                    b: v - 0.5 * w,
                    c: v + 0.5 * w,
                    d: v + w,
                },
            });
        }
        variables.push(FuzzyVariable {
            attribute: attribute.to_owned(),
            functions,
        });
    }

    let mut rules = Vec::new();
    for rule in &ruleset.rules {
        // Cartesian expansion: every term contributes one label, except `!=`
        // which forks the rule into below-side and above-side variants.
        let mut antecedents: Vec<Vec<AntecedentTerm>> = vec![Vec::new()];
        for term in &rule.terms {
            let plan = &plans[term.attribute.as_str()];
            let n_ineq = plan.inequalities.len();
            let labels: Vec<String> = match term.comparator {
                Comparator::Lt | Comparator::Le => {
                    let i = threshold_index(&plan.inequalities, term.value);
                    vec![indexed("low", i, n_ineq)]
                }
                Comparator::Gt | Comparator::Ge => {
                    let i = threshold_index(&plan.inequalities, term.value);
                    vec![indexed("high", i, n_ineq)]
                }
                Comparator::Eq => {
                    let i = threshold_index(&plan.equalities, term.value);
                    vec![indexed("near", i, plan.equalities.len())]
                }
                Comparator::Ne => {
                    let i = threshold_index(&plan.inequalities, term.value);
                    vec![indexed("low", i, n_ineq), indexed("high", i, n_ineq)]
                }
            };
            let mut next = Vec::with_capacity(antecedents.len() * labels.len());
            for prefix in &antecedents {
                for label in &labels {
                    let mut grown = prefix.clone();
                    grown.push(AntecedentTerm {
                        attribute: term.attribute.clone(),
                        label: label.clone(),
                    });
                    next.push(grown);
                }
            }
            antecedents = next;
        }
        let variants = antecedents.len();
        for (i, antecedent) in antecedents.into_iter().enumerate() {
            rules.push(FuzzyRule {
                name: indexed(&rule.name, i, variants),
                antecedent,
                consequent: OutputLabel::Ntl,
            });
        }
    }

    // Baseline: the complement of every inequality label used above, ANDed.
    // "near" terms have no single-sided complement and are skipped.
    let mut complements: BTreeSet<(String, String)> = BTreeSet::new();
    for rule in &rules {
        for term in &rule.antecedent {
            let flipped = if let Some(rest) = term.label.strip_prefix("low") {
                Some(format!("high{rest}"))
            } else {
                term.label.strip_prefix("high").map(|rest| format!("low{rest}"))
            };
            if let Some(label) = flipped {
                complements.insert((term.attribute.clone(), label));
            }
        }
    }
    rules.push(FuzzyRule {
        name: BASELINE_RULE_NAME.to_owned(),
        antecedent: complements
            .into_iter()
            .map(|(attribute, label)| AntecedentTerm { attribute, label })
            .collect(),
        consequent: OutputLabel::NoNtl,
    });

    let system = FuzzySystem {
        variables,
        rules,
        output: default_output(),
        grid_resolution: DEFAULT_GRID_RESOLUTION,
    };
    system.validate()?;
    Ok(system)
}

fn threshold_index(sorted: &[f64], v: f64) -> usize {
    sorted
        .binary_search_by(|x| x.partial_cmp(&v).expect("finite threshold"))
        .expect("threshold collected during planning")
}
