//! Stratified subsampling to a controlled positive-class proportion.
//!
//! Detection quality depends heavily on how rare fraud is in the evaluated
//! sample, so the harness re-draws samples from one labeled pool at a series
//! of fixed positive fractions and evaluates every classifier at each level.
//! [`subsample_indices`] draws such a sample: `round(target_size × fraction)`
//! positives, negatives filling the remainder, each class drawn uniformly
//! without replacement, and the combined sample shuffled.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// The default sweep: every positive-class fraction evaluated by the harness,
/// ascending from all-negative to all-positive.
pub const PROPORTION_LEVELS: [f64; 17] = [
    0.0, 0.001, 0.01, 0.02, 0.03, 0.04, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80,
    0.90, 1.0,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("proportion must be a finite number in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("target sample size must be positive")]
    ZeroTarget,
    #[error("labels ({labels}) and pool ({pool}) lengths differ")]
    LengthMismatch { labels: usize, pool: usize },
    #[error(
        "not enough {class} examples: {required} required, {available} available; \
         the largest feasible sample at this proportion is {max_feasible}"
    )]
    InsufficientClass {
        class: SampleClass,
        required: usize,
        available: usize,
        /// Largest `target_size` the pool can satisfy at the requested level.
        max_feasible: usize,
    },
}

/// Which side of the binary label ran short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleClass {
    Positive,
    Negative,
}

impl fmt::Display for SampleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleClass::Positive => f.write_str("positive"),
            SampleClass::Negative => f.write_str("negative"),
        }
    }
}

/// A validated positive-class fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ProportionLevel {
    fraction: f64,
}

impl ProportionLevel {
    pub fn new(fraction: f64) -> Result<Self, ResampleError> {
        if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
            return Err(ResampleError::InvalidFraction(fraction));
        }
        Ok(ProportionLevel { fraction })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// Positives a sample of `target_size` must contain at this level.
    pub fn positives_for(&self, target_size: usize) -> usize {
        (target_size as f64 * self.fraction).round() as usize
    }

    /// The default 17-level sweep as validated levels.
    pub fn standard_levels() -> Vec<ProportionLevel> {
        PROPORTION_LEVELS.iter().map(|&f| ProportionLevel { fraction: f }).collect()
    }
}

impl TryFrom<f64> for ProportionLevel {
    type Error = ResampleError;

    fn try_from(fraction: f64) -> Result<Self, Self::Error> {
        ProportionLevel::new(fraction)
    }
}

impl From<ProportionLevel> for f64 {
    fn from(level: ProportionLevel) -> f64 {
        level.fraction
    }
}

/// Shows the level the way result tables label columns ("5%", "0.1%").
impl fmt::Display for ProportionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = self.fraction * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            write!(f, "{}%", pct.round() as i64)
        } else {
            write!(f, "{}%", pct)
        }
    }
}

/// Largest `target_size` a pool with the given class counts can satisfy at
/// `fraction` under the `round(target × fraction)` positive-count rule.
pub fn max_feasible_size(positives: usize, negatives: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        negatives
    } else if fraction >= 1.0 {
        positives
    } else {
        // t ≤ P/f keeps round(t·f) ≤ P; t ≤ N/(1−f) keeps t − round(t·f) ≤ N.
        let by_pos = (positives as f64 / fraction).floor();
        let by_neg = (negatives as f64 / (1.0 - fraction)).floor();
        by_pos.min(by_neg) as usize
    }
}

/// Draws a stratified sample of exactly `target_size` pool indices whose
/// positive count is `round(target_size × fraction)`.
///
/// Within each class the draw is uniform without replacement; the combined
/// sample is then shuffled so callers can split it positionally. The result
/// is fully determined by `(labels, level, target_size, seed)`.
pub fn subsample_indices(
    labels: &[bool],
    level: ProportionLevel,
    target_size: usize,
    seed: u64,
) -> Result<Vec<usize>, ResampleError> {
    if target_size == 0 {
        return Err(ResampleError::ZeroTarget);
    }
    let positives: Vec<usize> =
        labels.iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i).collect();
    let negatives: Vec<usize> =
        labels.iter().enumerate().filter(|(_, &l)| !l).map(|(i, _)| i).collect();

    let required_pos = level.positives_for(target_size);
    let required_neg = target_size - required_pos;
    let max_feasible = max_feasible_size(positives.len(), negatives.len(), level.fraction());
    if required_pos > positives.len() {
        return Err(ResampleError::InsufficientClass {
            class: SampleClass::Positive,
            required: required_pos,
            available: positives.len(),
            max_feasible,
        });
    }
    if required_neg > negatives.len() {
        return Err(ResampleError::InsufficientClass {
            class: SampleClass::Negative,
            required: required_neg,
            available: negatives.len(),
            max_feasible,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, positives.len(), required_pos)
        .iter()
        .map(|i| positives[i])
        .collect();
    chosen.extend(sample(&mut rng, negatives.len(), required_neg).iter().map(|i| negatives[i]));
    chosen.shuffle(&mut rng);
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn pool(positives: usize, negatives: usize) -> Vec<bool> {
        // Interleave so "positions 0..k" never coincides with one class.
        let mut labels = Vec::with_capacity(positives + negatives);
        let (mut p, mut n) = (positives, negatives);
        while p > 0 || n > 0 {
            if p > 0 {
                labels.push(true);
                p -= 1;
            }
            if n > 0 {
                labels.push(false);
                n -= 1;
            }
        }
        labels
    }

    fn count_positives(labels: &[bool], indices: &[usize]) -> usize {
        indices.iter().filter(|&&i| labels[i]).count()
    }

    #[test]
    fn standard_levels_match_the_published_sweep() {
        let levels = ProportionLevel::standard_levels();
        assert_eq!(levels.len(), 17);
        assert_eq!(levels.first().unwrap().fraction(), 0.0);
        assert_eq!(levels.last().unwrap().fraction(), 1.0);
        assert!(levels.windows(2).all(|w| w[0].fraction() < w[1].fraction()));
        assert!(levels.iter().any(|l| l.fraction() == 0.001));
        assert!(levels.iter().any(|l| l.fraction() == 0.05));
    }

    #[test]
    fn positive_counts_follow_the_rounding_rule() {
        let labels = pool(200, 2000);
        let level = ProportionLevel::new(0.05).unwrap();
        let picked = subsample_indices(&labels, level, 1000, 9).unwrap();
        assert_eq!(picked.len(), 1000);
        assert_eq!(count_positives(&labels, &picked), 50);
    }

    #[test]
    fn extreme_fractions_draw_from_one_class_only() {
        let labels = pool(150, 150);
        let zero = ProportionLevel::new(0.0).unwrap();
        let picked = subsample_indices(&labels, zero, 100, 1).unwrap();
        assert_eq!(count_positives(&labels, &picked), 0);

        let one = ProportionLevel::new(1.0).unwrap();
        let picked = subsample_indices(&labels, one, 100, 1).unwrap();
        assert_eq!(count_positives(&labels, &picked), 100);
    }

    #[test]
    fn short_positive_supply_reports_class_and_feasible_maximum() {
        let labels = pool(30, 5000);
        let level = ProportionLevel::new(0.05).unwrap();
        let err = subsample_indices(&labels, level, 1000, 0).unwrap_err();
        match err {
            ResampleError::InsufficientClass { class, required, available, max_feasible } => {
                assert_eq!(class, SampleClass::Positive);
                assert_eq!(required, 50);
                assert_eq!(available, 30);
                assert_eq!(max_feasible, 600);
            }
            other => panic!("unexpected error: {other:?}"),
        }
        let message = err.to_string();
        assert!(message.contains("positive"), "{message}");
        assert!(message.contains("600"), "{message}");
    }

    #[test]
    fn short_negative_supply_reports_class_and_feasible_maximum() {
        let labels = pool(100, 5);
        let level = ProportionLevel::new(0.2).unwrap();
        let err = subsample_indices(&labels, level, 10, 0).unwrap_err();
        match err {
            ResampleError::InsufficientClass { class, required, available, max_feasible } => {
                assert_eq!(class, SampleClass::Negative);
                assert_eq!(required, 8);
                assert_eq!(available, 5);
                // min(floor(100 / 0.2), floor(5 / 0.8)) = min(500, 6)
                assert_eq!(max_feasible, 6);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn max_feasible_handles_the_degenerate_fractions() {
        assert_eq!(max_feasible_size(30, 700, 0.0), 700);
        assert_eq!(max_feasible_size(30, 700, 1.0), 30);
        assert_eq!(max_feasible_size(30, 700, 0.05), 600);
    }

    #[test]
    fn every_standard_level_is_exact_at_target_1000() {
        let labels = pool(1000, 1000);
        for level in ProportionLevel::standard_levels() {
            let picked = subsample_indices(&labels, level, 1000, 42).unwrap();
            assert_eq!(picked.len(), 1000);
            let expected = (1000.0 * level.fraction()).round() as usize;
            assert_eq!(count_positives(&labels, &picked), expected, "level {level}");
            let distinct: HashSet<usize> = picked.iter().copied().collect();
            assert_eq!(distinct.len(), picked.len(), "duplicate draw at level {level}");
        }
    }

    #[test]
    fn same_seed_reproduces_and_different_seeds_diverge() {
        let labels = pool(400, 400);
        let level = ProportionLevel::new(0.3).unwrap();
        let a = subsample_indices(&labels, level, 200, 7).unwrap();
        let b = subsample_indices(&labels, level, 200, 7).unwrap();
        assert_eq!(a, b);
        let c = subsample_indices(&labels, level, 200, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_order_mixes_the_classes() {
        let labels = pool(300, 300);
        let level = ProportionLevel::new(0.5).unwrap();
        let picked = subsample_indices(&labels, level, 200, 3).unwrap();
        let first_negative = picked.iter().position(|&i| !labels[i]).unwrap();
        let last_positive = picked.iter().rposition(|&i| labels[i]).unwrap();
        assert!(
            first_negative < last_positive,
            "sample left the classes in contiguous blocks"
        );
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        for bad in [-0.1, 1.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                ProportionLevel::new(bad),
                Err(ResampleError::InvalidFraction(_))
            ));
        }
        let level = ProportionLevel::new(0.5).unwrap();
        assert_eq!(
            subsample_indices(&[true, false], level, 0, 0),
            Err(ResampleError::ZeroTarget)
        );
    }

    #[test]
    fn levels_serialize_as_plain_numbers() {
        let level = ProportionLevel::new(0.05).unwrap();
        let text = serde_json::to_string(&level).unwrap();
        assert_eq!(text, "0.05");
        let back: ProportionLevel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, level);
        assert!(serde_json::from_str::<ProportionLevel>("1.5").is_err());
    }

    #[test]
    fn display_matches_result_table_labels() {
        let show = |f: f64| ProportionLevel::new(f).unwrap().to_string();
        assert_eq!(show(0.05), "5%");
        assert_eq!(show(0.001), "0.1%");
        assert_eq!(show(0.0), "0%");
        assert_eq!(show(1.0), "100%");
    }

    proptest! {
        #[test]
        fn feasible_draws_meet_every_contract(
            positives in 1usize..80,
            negatives in 1usize..80,
            fraction in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let level = ProportionLevel::new(fraction).unwrap();
            let labels = pool(positives, negatives);
            let target = max_feasible_size(positives, negatives, fraction).min(50);
            prop_assume!(target > 0);

            let picked = subsample_indices(&labels, level, target, seed).unwrap();
            prop_assert_eq!(picked.len(), target);

            let got_pos = count_positives(&labels, &picked);
            prop_assert_eq!(got_pos, level.positives_for(target));
            // Achieved fraction deviates from the request by < 1/target.
            let achieved = got_pos as f64 / target as f64;
            prop_assert!((achieved - fraction).abs() < 1.0 / target as f64 + 1e-12);

            let distinct: HashSet<usize> = picked.iter().copied().collect();
            prop_assert_eq!(distinct.len(), picked.len());
            prop_assert!(picked.iter().all(|&i| i < labels.len()));

            let again = subsample_indices(&labels, level, target, seed).unwrap();
            prop_assert_eq!(picked, again);
        }
    }
}
