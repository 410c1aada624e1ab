//! Dual SVM solver: pairwise coordinate ascent (SMO) on
//! `max Σαᵢ − ½ΣΣ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)` subject to `0 ≤ αᵢ ≤ C`,
//! `Σ αᵢyᵢ = 0`.
//!
//! Pair selection is deterministic: scan every index, and for a KKT
//! violator pick the partner maximizing |Eᵢ − Eⱼ| (lowest index on ties),
//! so training needs no randomness and is exactly reproducible.

use super::ResolvedKernel;

/// KKT tolerance: a multiplier is considered optimal when its violation is
/// within this bound.
pub(crate) const KKT_TOL: f64 = 1e-3;

/// A step must move a multiplier at least this far to count as progress.
const MIN_ALPHA_STEP: f64 = 1e-10;

/// Multipliers below this are treated as zero when extracting support
/// vectors.
pub(crate) const SUPPORT_EPS: f64 = 1e-8;

pub(crate) struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub dual_objective: f64,
}

/// `rows` are (standardized) feature rows, `labels_pm` ∈ {−1,+1}.
pub(crate) fn smo_solve(
    rows: &[Vec<f64>],
    labels_pm: &[f64],
    kernel: &ResolvedKernel,
    c: f64,
) -> SmoSolution {
    let m = rows.len();
    // The kernel matrix is small in every use here (≤ a few thousand rows
    // would be the concern; dual training is reserved for modest samples).
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| kernel.eval(&rows[i], &rows[j])).collect())
        .collect();

    let mut alphas = vec![0.0; m];
    let mut bias = 0.0;
    // Decision values start at 0 for all points (α = 0, b = 0).
    let mut f: Vec<f64> = vec![0.0; m];
    let mut passes = 0usize;
    const MAX_PASSES: usize = 10_000;

    loop {
        passes += 1;
        let mut changed = false;
        for i in 0..m {
            let e_i = f[i] - labels_pm[i];
            let r_i = e_i * labels_pm[i];
            let violates = (r_i < -KKT_TOL && alphas[i] < c) || (r_i > KKT_TOL && alphas[i] > 0.0);
            if !violates {
                continue;
            }
            // Prefer the partner with the largest |E_i − E_j| (it moves the
            // pair farthest), then fall back to index order so a degenerate
            // first choice cannot stall the solver.
            let mut j_best = usize::MAX;
            let mut gap_best = -1.0;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let gap = (e_i - (f[j] - labels_pm[j])).abs();
                if gap > gap_best {
                    gap_best = gap;
                    j_best = j;
                }
            }
            let candidates = std::iter::once(j_best).chain((0..m).filter(|&j| j != j_best));
            for j in candidates {
                if j == i || j == usize::MAX {
                    continue;
                }
                if take_step(i, j, labels_pm, &gram, c, &mut alphas, &mut bias, &mut f) {
                    changed = true;
                    break;
                }
            }
        }
        if !changed || passes >= MAX_PASSES {
            break;
        }
    }

    let mut dual = alphas.iter().sum::<f64>();
    for i in 0..m {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            if alphas[j] == 0.0 {
                continue;
            }
            dual -= 0.5 * alphas[i] * alphas[j] * labels_pm[i] * labels_pm[j] * gram[i][j];
        }
    }

    SmoSolution { alphas, bias, dual_objective: dual }
}

#[allow(clippy::too_many_arguments)]
fn take_step(
    i: usize,
    j: usize,
    labels_pm: &[f64],
    gram: &[Vec<f64>],
    c: f64,
    alphas: &mut [f64],
    bias: &mut f64,
    f: &mut [f64],
) -> bool {
    let (y_i, y_j) = (labels_pm[i], labels_pm[j]);
    let (a_i_old, a_j_old) = (alphas[i], alphas[j]);
    let e_i = f[i] - y_i;
    let e_j = f[j] - y_j;

    // Feasible box for α_j given the equality constraint.
    let (lo, hi) = if y_i == y_j {
        ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
    } else {
        ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
    };
    if lo >= hi {
        return false;
    }

    // Second derivative of the objective along the pair direction.
    let eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
    if eta >= 0.0 {
        // Degenerate curvature (identical/duplicated points): the optimum
        // sits at an end of the box; skipping keeps the solver simple and
        // the KKT scan will revisit if it matters.
        return false;
    }

    let mut a_j = a_j_old - y_j * (e_i - e_j) / eta;
    a_j = a_j.clamp(lo, hi);
    if (a_j - a_j_old).abs() < MIN_ALPHA_STEP {
        return false;
    }
    let a_i = a_i_old + y_i * y_j * (a_j_old - a_j);
    alphas[i] = a_i;
    alphas[j] = a_j;

    // Bias from whichever multiplier landed strictly inside the box.
    let b1 = *bias - e_i - y_i * (a_i - a_i_old) * gram[i][i] - y_j * (a_j - a_j_old) * gram[i][j];
    let b2 = *bias - e_j - y_i * (a_i - a_i_old) * gram[i][j] - y_j * (a_j - a_j_old) * gram[j][j];
    let new_bias = if a_i > 0.0 && a_i < c {
        b1
    } else if a_j > 0.0 && a_j < c {
        b2
    } else {
        0.5 * (b1 + b2)
    };

    let delta_i = y_i * (a_i - a_i_old);
    let delta_j = y_j * (a_j - a_j_old);
    let delta_b = new_bias - *bias;
    *bias = new_bias;
    for (k, fk) in f.iter_mut().enumerate() {
        *fk += delta_i * gram[i][k] + delta_j * gram[j][k] + delta_b;
    }
    true
}

/// Worst KKT violation of a solution; an optimality certificate when ≤ tol.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn kkt_violation(
    labels_pm: &[f64],
    alphas: &[f64],
    f: impl Fn(usize) -> f64,
    c: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for (i, (&a, &y)) in alphas.iter().zip(labels_pm).enumerate() {
        let r = (f(i) - y) * y;
        let violation = if a <= SUPPORT_EPS {
            (-r).max(0.0) // needs r ≥ 0
        } else if a >= c - SUPPORT_EPS {
            r.max(0.0) // needs r ≤ 0
        } else {
            r.abs() // needs r ≈ 0
        };
        worst = worst.max(violation);
    }
    worst
}
