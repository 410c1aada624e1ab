//! Membership functions and the order-restoring projection used during
//! gradient updates.

use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Smallest steepness magnitude a sigmoid may keep; prevents a gradient step
/// from flattening a boundary into a constant.
pub const MIN_STEEPNESS: f64 = 1e-9;

/// Degree-of-membership curve over one attribute. Output is in [0,1] for
/// every finite input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MembershipFunction {
    /// 0 outside [a,d], 1 on [b,c], linear on the ramps; requires a≤b≤c≤d.
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
    /// `1 / (1 + exp(−steepness·(x−center)))`; steepness may be negative
    /// (a "below" boundary) but never zero.
    Sigmoid { center: f64, steepness: f64 },
}

impl MembershipFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            MembershipFunction::Trapezoid { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x >= b && x <= c {
                    1.0
                } else if x < b {
                    (x - a) / (b - a)
                } else {
                    (d - x) / (d - c)
                }
            }
            MembershipFunction::Sigmoid { center, steepness } => {
                1.0 / (1.0 + (-steepness * (x - center)).exp())
            }
        }
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let bad = |msg: String| Err(FuzzyError::InvalidMembership(msg));
        match *self {
            MembershipFunction::Trapezoid { a, b, c, d } => {
                if ![a, b, c, d].iter().all(|v| v.is_finite()) {
                    return bad(format!("trapezoid({a},{b},{c},{d}): non-finite parameter"));
                }
                if !(a <= b && b <= c && c <= d) {
                    return bad(format!("trapezoid({a},{b},{c},{d}): requires a <= b <= c <= d"));
                }
            }
            MembershipFunction::Sigmoid { center, steepness } => {
                if !center.is_finite() || !steepness.is_finite() {
                    return bad(format!("sigmoid({center},{steepness}): non-finite parameter"));
                }
                if steepness == 0.0 {
                    return bad(format!("sigmoid({center},0): steepness must be nonzero"));
                }
            }
        }
        Ok(())
    }

    /// Closed support as an interval; sigmoids support the whole line.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            MembershipFunction::Trapezoid { a, d, .. } => (a, d),
            MembershipFunction::Sigmoid { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            MembershipFunction::Trapezoid { .. } => 4,
            MembershipFunction::Sigmoid { .. } => 2,
        }
    }

    pub fn param(&self, idx: usize) -> f64 {
        match (self, idx) {
            (MembershipFunction::Trapezoid { a, .. }, 0) => *a,
            (MembershipFunction::Trapezoid { b, .. }, 1) => *b,
            (MembershipFunction::Trapezoid { c, .. }, 2) => *c,
            (MembershipFunction::Trapezoid { d, .. }, 3) => *d,
            (MembershipFunction::Sigmoid { center, .. }, 0) => *center,
            (MembershipFunction::Sigmoid { steepness, .. }, 1) => *steepness,
            _ => panic!("parameter index {idx} out of range"),
        }
    }

    /// Raw parameter write; may leave the function invalid until
    /// [`MembershipFunction::project`] runs.
    pub fn set_param(&mut self, idx: usize, value: f64) {
        match (self, idx) {
            (MembershipFunction::Trapezoid { a, .. }, 0) => *a = value,
            (MembershipFunction::Trapezoid { b, .. }, 1) => *b = value,
            (MembershipFunction::Trapezoid { c, .. }, 2) => *c = value,
            (MembershipFunction::Trapezoid { d, .. }, 3) => *d = value,
            (MembershipFunction::Sigmoid { center, .. }, 0) => *center = value,
            (MembershipFunction::Sigmoid { steepness, .. }, 1) => *steepness = value,
            _ => panic!("parameter index {idx} out of range"),
        }
    }

    /// Restores validity after a raw update: trapezoid parameters are
    /// replaced by their closest ordered quadruple (least-squares isotonic
    /// projection), sigmoid steepness is kept away from zero. A valid
    /// function is left unchanged.
    pub fn project(&mut self) {
        match self {
            MembershipFunction::Trapezoid { a, b, c, d } => {
                let mut params = [*a, *b, *c, *d];
                isotonic_projection(&mut params);
                [*a, *b, *c, *d] = params;
            }
            MembershipFunction::Sigmoid { steepness, .. } => {
                if steepness.abs() < MIN_STEEPNESS {
                    *steepness = if *steepness < 0.0 { -MIN_STEEPNESS } else { MIN_STEEPNESS };
                }
            }
        }
    }
}

/// In-place least-squares projection onto non-decreasing sequences
/// (pool-adjacent-violators with unit weights). Sorted input is a fixed
/// point.
pub fn isotonic_projection(values: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 > m2 {
                blocks.truncate(blocks.len() - 2);
                let merged = (c1 + c2) as f64;
                blocks.push(((m1 * c1 as f64 + m2 * c2 as f64) / merged, c1 + c2));
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (mean, count) in blocks {
        for _ in 0..count {
            values[i] = mean;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
        MembershipFunction::Trapezoid { a, b, c, d }
    }

    #[test]
    fn trapezoid_plateau_ramps_and_outside() {
        let mf = trap(0.0, 1.0, 2.0, 3.0);
        assert_eq!(mf.eval(1.5), 1.0);
        assert_eq!(mf.eval(0.5), 0.5);
        assert_eq!(mf.eval(2.5), 0.5);
        assert_eq!(mf.eval(-0.1), 0.0);
        assert_eq!(mf.eval(3.1), 0.0);
        assert_eq!(mf.eval(0.0), 0.0);
        assert_eq!(mf.eval(1.0), 1.0);
    }

    #[test]
    fn degenerate_trapezoids_stay_in_range() {
        // Triangle (b == c) and spike-free edges (a == b).
        let triangle = trap(0.0, 1.0, 1.0, 2.0);
        assert_eq!(triangle.eval(1.0), 1.0);
        assert_eq!(triangle.eval(0.5), 0.5);
        let square = trap(1.0, 1.0, 2.0, 2.0);
        assert_eq!(square.eval(1.0), 1.0);
        assert_eq!(square.eval(2.0), 1.0);
        assert_eq!(square.eval(0.999), 0.0);
    }

    #[test]
    fn sigmoid_at_center_is_half() {
        let mf = MembershipFunction::Sigmoid { center: 0.0, steepness: 2.0 };
        assert_eq!(mf.eval(0.0), 0.5);
        assert!(mf.eval(10.0) > 0.99);
        assert!(mf.eval(-10.0) < 0.01);
    }

    #[test]
    fn opposite_sigmoids_are_exact_complements() {
        let up = MembershipFunction::Sigmoid { center: 5.0, steepness: 4.0 };
        let down = MembershipFunction::Sigmoid { center: 5.0, steepness: -4.0 };
        for x in [-3.0, 0.0, 4.9, 5.0, 5.1, 20.0] {
            let s = up.eval(x) + down.eval(x);
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at {x}");
        }
    }

    #[test]
    fn validation_rejects_disorder_and_flat_sigmoids() {
        assert!(trap(0.0, 2.0, 1.0, 3.0).validate().is_err());
        assert!(trap(0.0, 1.0, 2.0, 3.0).validate().is_ok());
        assert!(MembershipFunction::Sigmoid { center: 0.0, steepness: 0.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn projection_fixes_disorder_and_clamps_steepness() {
        let mut mf = trap(3.0, 1.0, 2.0, 0.0);
        mf.project();
        assert!(mf.validate().is_ok());
        let mut flat = MembershipFunction::Sigmoid { center: 0.0, steepness: -1e-20 };
        flat.project();
        assert_eq!(flat, MembershipFunction::Sigmoid { center: 0.0, steepness: -MIN_STEEPNESS });
    }

    proptest! {
        #[test]
        fn membership_output_always_in_unit_interval(
            x in -1e6..1e6f64,
            a in -10.0..10.0f64,
            spans in proptest::array::uniform3(0.0..5.0f64),
            center in -10.0..10.0f64,
            steepness in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64],
        ) {
            let mf = trap(a, a + spans[0], a + spans[0] + spans[1], a + spans[0] + spans[1] + spans[2]);
            let y = mf.eval(x);
            prop_assert!((0.0..=1.0).contains(&y), "trapezoid gave {y}");
            let s = MembershipFunction::Sigmoid { center, steepness };
            let y = s.eval(x);
            prop_assert!((0.0..=1.0).contains(&y), "sigmoid gave {y}");
        }

        /// The projection output is sorted, idempotent, and at least as close
        /// to the input as any other sorted candidate.
        #[test]
        fn isotonic_projection_is_optimal(
            input in proptest::array::uniform4(-10.0..10.0f64),
            candidate_raw in proptest::array::uniform4(-10.0..10.0f64),
        ) {
            let mut projected = input;
            isotonic_projection(&mut projected);
            prop_assert!(projected.windows(2).all(|w| w[0] <= w[1]));

            let mut twice = projected;
            isotonic_projection(&mut twice);
            for (p, t) in projected.iter().zip(&twice) {
                prop_assert!((p - t).abs() < 1e-12);
            }

            let mut candidate = candidate_raw;
            candidate.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let dist = |u: &[f64; 4], v: &[f64; 4]| -> f64 {
                u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum()
            };
            prop_assert!(dist(&input, &projected) <= dist(&input, &candidate) + 1e-9);
        }

        #[test]
        fn projection_keeps_valid_functions_unchanged(
            a in -10.0..10.0f64,
            spans in proptest::array::uniform3(0.0..5.0f64),
        ) {
            let original = trap(a, a + spans[0], a + spans[0] + spans[1], a + spans[0] + spans[1] + spans[2]);
            let mut projected = original.clone();
            projected.project();
            prop_assert_eq!(projected, original);
        }
    }
}
