//! Fuzzy system structure, Mamdani inference and centroid defuzzification.
//!
//! Inference: every rule's firing strength is the min of its antecedent
//! membership degrees; each output membership function is clipped at the max
//! strength of the rules that conclude it; the clipped curves are aggregated
//! pointwise by max over a uniform grid on [0,1] and defuzzified by centroid.
//! An identically-zero aggregate defuzzifies to 0.5 (maximal uncertainty).

use serde::{Deserialize, Serialize};

use super::membership::MembershipFunction;
use super::FuzzyError;
use crate::features::AttributeVector;

pub const DEFAULT_GRID_RESOLUTION: usize = 1001;

/// Score the two output membership functions that no-NTL / NTL rules clip.
/// Both vanish at 0 and 1 (keeping the sampled centroid quadrature-exact for
/// on-grid breakpoints) and mirror each other around 0.5.
pub fn default_output() -> OutputConfig {
    OutputConfig {
        no_ntl: MembershipFunction::Trapezoid { a: 0.0, b: 0.1, c: 0.4, d: 0.6 },
        ntl: MembershipFunction::Trapezoid { a: 0.4, b: 0.6, c: 0.9, d: 1.0 },
    }
}

/// One attribute's labeled membership functions. The label count follows the
/// thresholds the source rules impose: a lone equality gives 1, one
/// inequality threshold gives a complementary pair, two give 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub attribute: String,
    pub functions: Vec<LabeledFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFunction {
    pub label: String,
    pub mf: MembershipFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLabel {
    NoNtl,
    Ntl,
}

/// `attribute IS label`, one conjunct of a rule antecedent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntecedentTerm {
    pub attribute: String,
    pub label: String,
}

/// Fuzzy rule: AND over antecedent terms, concluding one output label.
/// An empty antecedent fires at strength 1 (used by baseline rules).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub name: String,
    pub antecedent: Vec<AntecedentTerm>,
    pub consequent: OutputLabel,
}

/// Output score variable: two membership functions over [0,1] whose supports
/// jointly cover it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub no_ntl: MembershipFunction,
    pub ntl: MembershipFunction,
}

/// Complete Mamdani system. Operators are fixed: AND = min, implication =
/// clip, aggregation = max, defuzzifier = centroid on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySystem {
    pub variables: Vec<FuzzyVariable>,
    pub rules: Vec<FuzzyRule>,
    pub output: OutputConfig,
    pub grid_resolution: usize,
}

impl FuzzySystem {
    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), FuzzyError> {
        if self.grid_resolution < 2 {
            return Err(FuzzyError::InvalidGrid(self.grid_resolution));
        }
        for var in &self.variables {
            let count = var.functions.len();
            if !matches!(count, 1 | 2 | 4) {
                return Err(FuzzyError::UnsupportedFunctionCount {
                    attribute: var.attribute.clone(),
                    count,
                });
            }
            for lf in &var.functions {
                lf.mf.validate()?;
            }
        }
        for rule in &self.rules {
            for term in &rule.antecedent {
                if self.lookup(&term.attribute, &term.label).is_none() {
                    return Err(FuzzyError::UnknownLabel {
                        rule: rule.name.clone(),
                        attribute: term.attribute.clone(),
                        label: term.label.clone(),
                    });
                }
            }
        }
        self.output.no_ntl.validate()?;
        self.output.ntl.validate()?;
        let (lo_a, lo_d) = self.output.no_ntl.support();
        let (hi_a, hi_d) = self.output.ntl.support();
        let covered = lo_a.min(hi_a) <= 0.0 && lo_d.max(hi_d) >= 1.0 && hi_a <= lo_d;
        if !covered {
            return Err(FuzzyError::OutputNotCovering);
        }
        Ok(())
    }

    fn lookup(&self, attribute: &str, label: &str) -> Option<&MembershipFunction> {
        self.variables
            .iter()
            .find(|v| v.attribute == attribute)?
            .functions
            .iter()
            .find(|f| f.label == label)
            .map(|f| &f.mf)
    }

    /// Max firing strength per output label over all rules.
    fn strengths(&self, attrs: &AttributeVector) -> Result<(f64, f64), FuzzyError> {
        let mut no_ntl: f64 = 0.0;
        let mut ntl: f64 = 0.0;
        for rule in &self.rules {
            let mut strength: f64 = 1.0;
            for term in &rule.antecedent {
                let x = attrs
                    .get(&term.attribute)
                    .ok_or_else(|| FuzzyError::MissingAttribute(term.attribute.clone()))?;
                let mf = self.lookup(&term.attribute, &term.label).ok_or_else(|| {
                    FuzzyError::UnknownLabel {
                        rule: rule.name.clone(),
                        attribute: term.attribute.clone(),
                        label: term.label.clone(),
                    }
                })?;
                strength = strength.min(mf.eval(x));
            }
            match rule.consequent {
                OutputLabel::NoNtl => no_ntl = no_ntl.max(strength),
                OutputLabel::Ntl => ntl = ntl.max(strength),
            }
        }
        Ok((no_ntl, ntl))
    }

    /// Aggregated output curve sampled on the uniform grid.
    pub fn aggregate_curve(&self, no_ntl_strength: f64, ntl_strength: f64) -> Vec<f64> {
        let n = self.grid_resolution;
        let step = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = i as f64 * step;
                let lo = no_ntl_strength.min(self.output.no_ntl.eval(x));
                let hi = ntl_strength.min(self.output.ntl.eval(x));
                lo.max(hi)
            })
            .collect()
    }
}

/// Center of mass `Σ(x_i·μ_i) / Σ(μ_i)` of a curve sampled uniformly over
/// [0,1]; `None` when the curve is identically zero.
pub fn defuzzify_centroid(samples: &[f64]) -> Option<f64> {
    assert!(samples.len() >= 2, "a curve needs at least two samples");
    let step = 1.0 / (samples.len() - 1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &mu) in samples.iter().enumerate() {
        num += i as f64 * step * mu;
        den += mu;
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Defuzzified NTL score in [0,1]; 0.5 when no rule fires at all.
pub fn mamdani_infer(system: &FuzzySystem, attrs: &AttributeVector) -> Result<f64, FuzzyError> {
    let (no_ntl, ntl) = system.strengths(attrs)?;
    let curve = system.aggregate_curve(no_ntl, ntl);
    Ok(defuzzify_centroid(&curve).unwrap_or(0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDecision {
    pub score: f64,
    pub label: bool,
}

/// Label 1 iff the defuzzified score strictly exceeds `threshold`
/// (default 0.5).
pub fn classify_fuzzy(
    system: &FuzzySystem,
    attrs: &AttributeVector,
    threshold: f64,
) -> Result<FuzzyDecision, FuzzyError> {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "threshold must lie strictly inside (0,1)"
    );
    let score = mamdani_infer(system, attrs)?;
    Ok(FuzzyDecision {
        score,
        label: score > threshold,
    })
}
