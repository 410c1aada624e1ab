//! Confusion matrices and the single-operating-point metric set.

use super::EvalError;
use serde::{Deserialize, Serialize};

/// Exact prediction-versus-label counts for a binary classifier.
///
/// The normalized accessors return `None` when the corresponding actual
/// class is empty. `fpr`/`fnr` are defined as complements of `tnr`/`tpr`, so
/// `tnr + fpr == 1.0` and `tpr + fnr == 1.0` hold bit-exactly whenever
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_negatives + self.true_negatives + self.false_positives
    }

    pub fn actual_positives(&self) -> u64 {
        self.true_positives + self.false_negatives
    }

    pub fn actual_negatives(&self) -> u64 {
        self.true_negatives + self.false_positives
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self.total() {
            0 => None,
            n => Some((self.true_positives + self.true_negatives) as f64 / n as f64),
        }
    }

    /// Recall: the proportion of actual positives found.
    pub fn true_positive_rate(&self) -> Option<f64> {
        match self.actual_positives() {
            0 => None,
            n => Some(self.true_positives as f64 / n as f64),
        }
    }

    /// Specificity: the proportion of actual negatives kept negative.
    pub fn true_negative_rate(&self) -> Option<f64> {
        match self.actual_negatives() {
            0 => None,
            n => Some(self.true_negatives as f64 / n as f64),
        }
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        self.true_negative_rate().map(|tnr| 1.0 - tnr)
    }

    pub fn false_negative_rate(&self) -> Option<f64> {
        self.true_positive_rate().map(|tpr| 1.0 - tpr)
    }
}

/// Counts prediction/label agreement. Errors on empty or mismatched input.
pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        false_negatives: 0,
        true_negatives: 0,
        false_positives: 0,
    };
    for (&predicted, &actual) in predictions.iter().zip(labels) {
        match (actual, predicted) {
            (true, true) => cm.true_positives += 1,
            (true, false) => cm.false_negatives += 1,
            (false, false) => cm.true_negatives += 1,
            (false, true) => cm.false_positives += 1,
        }
    }
    Ok(cm)
}

/// Area under the two-segment ROC polyline through (0,0), the classifier's
/// single operating point (fpr, tpr), and (1,1).
///
/// Algebraically the area is `(recall + specificity) / 2`, and it is
/// computed in exactly that form so published table values reproduce
/// bit-for-bit. 0.5 is the random-guessing line; a classifier can score
/// below it.
pub fn single_point_auc(recall: f64, specificity: f64) -> f64 {
    (recall + specificity) / 2.0
}

/// The full metric set at one operating point. Only defined when both actual
/// classes are present; see [`metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    /// True-positive rate.
    pub recall: f64,
    /// True-negative rate.
    pub specificity: f64,
    pub fpr: f64,
    pub auc: f64,
}

/// Computes the metric set, or the explicit undefined marker
/// ([`EvalError::SingleClassMetrics`]) when only one actual class exists.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyInput);
    }
    let (Some(recall), Some(specificity)) = (cm.true_positive_rate(), cm.true_negative_rate())
    else {
        return Err(EvalError::SingleClassMetrics);
    };
    Ok(MetricReport {
        accuracy: cm.accuracy().expect("non-empty matrix"),
        recall,
        specificity,
        fpr: 1.0 - specificity,
        auc: single_point_auc(recall, specificity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(tp: u64, fn_: u64, tn: u64, fp: u64) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: tp,
            false_negatives: fn_,
            true_negatives: tn,
            false_positives: fp,
        }
    }

    #[test]
    fn perfect_and_inverted_predictions_count_exactly() {
        let labels = [true, false, true, false];
        let cm = confusion(&labels, &labels).unwrap();
        assert_eq!(cm, matrix(2, 0, 2, 0));
        let report = metrics(&cm).unwrap();
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.accuracy, 1.0);

        let inverted: Vec<bool> = labels.iter().map(|&l| !l).collect();
        let cm = confusion(&inverted, &labels).unwrap();
        assert_eq!(cm, matrix(0, 2, 0, 2));
        let report = metrics(&cm).unwrap();
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.specificity, 0.0);
        assert_eq!(report.auc, 0.0);
    }

    #[test]
    fn always_negative_on_a_rare_positive_pool_looks_accurate_but_blind() {
        let mut labels = vec![false; 990];
        labels.extend(std::iter::repeat(true).take(10));
        let predictions = vec![false; 1000];
        let report = metrics(&confusion(&predictions, &labels).unwrap()).unwrap();
        assert_eq!(report.accuracy, 0.99);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.auc, 0.5);
    }

    #[test]
    fn mismatched_or_empty_inputs_are_rejected() {
        assert!(matches!(
            confusion(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { predictions: 1, labels: 2 })
        ));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn published_operating_points_reproduce_exactly() {
        // tpr 0.40 / tnr 0.53: worse than chance despite 40% recall.
        let report = metrics(&matrix(40, 60, 53, 47)).unwrap();
        assert_eq!(report.recall, 0.40);
        assert_eq!(report.specificity, 0.53);
        assert_eq!(report.auc, 0.465);
        assert!(report.auc < 0.5);

        // tpr 0.75 / tnr 0.35.
        let report = metrics(&matrix(75, 25, 35, 65)).unwrap();
        assert_eq!(report.auc, 0.55);
    }

    #[test]
    fn single_class_metrics_are_an_explicit_undefined_marker() {
        let no_negatives = matrix(5, 3, 0, 0);
        assert_eq!(no_negatives.true_negative_rate(), None);
        assert_eq!(no_negatives.false_positive_rate(), None);
        let err = metrics(&no_negatives).unwrap_err();
        assert!(matches!(err, EvalError::SingleClassMetrics));
        assert!(err.to_string().contains("undefined"), "{err}");

        let no_positives = matrix(0, 0, 7, 2);
        assert_eq!(no_positives.true_positive_rate(), None);
        assert!(matches!(metrics(&no_positives), Err(EvalError::SingleClassMetrics)));

        assert!(matches!(metrics(&matrix(0, 0, 0, 0)), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn auc_equals_the_two_segment_trapezoid_area() {
        for cm in [matrix(40, 60, 53, 47), matrix(75, 25, 35, 65), matrix(1, 9, 90, 10)] {
            let report = metrics(&cm).unwrap();
            let (tpr, fpr) = (report.recall, report.fpr);
            let trapezoid = fpr * tpr / 2.0 + (1.0 - fpr) * (tpr + 1.0) / 2.0;
            assert!((report.auc - trapezoid).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rate_complements_are_bit_exact(
            tp in 0u64..10_000,
            fn_ in 0u64..10_000,
            tn in 0u64..10_000,
            fp in 0u64..10_000,
        ) {
            let cm = matrix(tp, fn_, tn, fp);
            if let (Some(tpr), Some(fnr)) = (cm.true_positive_rate(), cm.false_negative_rate()) {
                prop_assert_eq!(tpr + fnr, 1.0);
            }
            if let (Some(tnr), Some(fpr)) = (cm.true_negative_rate(), cm.false_positive_rate()) {
                prop_assert_eq!(tnr + fpr, 1.0);
            }
        }

        #[test]
        fn recount_oracle_agrees_on_random_predictions(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..1000)
        ) {
            let predictions: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            let cm = confusion(&predictions, &labels).unwrap();

            let recount = |want_pred: bool, want_label: bool| {
                pairs.iter().filter(|(p, l)| *p == want_pred && *l == want_label).count() as u64
            };
            prop_assert_eq!(cm.true_positives, recount(true, true));
            prop_assert_eq!(cm.false_negatives, recount(false, true));
            prop_assert_eq!(cm.true_negatives, recount(false, false));
            prop_assert_eq!(cm.false_positives, recount(true, false));
            prop_assert_eq!(cm.total() as usize, pairs.len());

            if cm.actual_positives() > 0 && cm.actual_negatives() > 0 {
                let report = metrics(&cm).unwrap();
                prop_assert!((0.0..=1.0).contains(&report.auc));
                prop_assert_eq!(
                    report.accuracy,
                    (cm.true_positives + cm.true_negatives) as f64 / pairs.len() as f64
                );
                if report.recall + report.specificity == 1.0 {
                    prop_assert_eq!(report.auc, 0.5);
                }
            }
        }
    }
}
