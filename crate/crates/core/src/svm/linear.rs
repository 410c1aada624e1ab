//! Linear SVM trained by stochastic subgradient descent on the hinge loss
//! (Pegasos-style schedule), followed by an exact line search on the scale
//! of the averaged iterate.
//!
//! The primal objective is `(1/2)·‖w‖² + C·Σ hinge(y·(w·x + b))`. The
//! stochastic phase runs on an augmented representation (bias as an extra
//! always-1 feature, so it shares the 1/(λt) schedule); the polish phase
//! then minimizes the true objective exactly along the ray `s·(w, b)`, which
//! on separable data drives the total hinge loss to zero.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hinge total `Σ max(0, 1 − y·(w·x + b))` — the data term of the primal.
pub(crate) fn hinge_total(rows: &[Vec<f64>], labels_pm: &[f64], w: &[f64], b: f64) -> f64 {
    rows.iter()
        .zip(labels_pm)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum()
}

pub(crate) fn primal_objective(
    rows: &[Vec<f64>],
    labels_pm: &[f64],
    w: &[f64],
    b: f64,
    c: f64,
) -> f64 {
    0.5 * dot(w, w) + c * hinge_total(rows, labels_pm, w, b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct PegasosFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Primal objective of the running-average iterate after each epoch.
    #[cfg_attr(not(test), allow(dead_code))]
    pub epoch_objectives: Vec<f64>,
}

/// `rows` are standardized feature rows, `labels_pm` ∈ {−1,+1}.
pub(crate) fn pegasos(
    rows: &[Vec<f64>],
    labels_pm: &[f64],
    c: f64,
    epochs: usize,
    seed: u64,
) -> PegasosFit {
    let m = rows.len();
    let n = rows[0].len();
    let lambda = 1.0 / (c * m as f64);

    // Augmented weight vector: slot n is the bias.
    let mut w = vec![0.0; n + 1];
    let mut w_sum = vec![0.0; n + 1];
    let mut t = 0u64;
    let mut epoch_objectives = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &rows[i];
            let y = labels_pm[i];
            let margin = y * (dot(&w[..n], x) + w[n]);
            // Shrink: (1 − ηλ) = (1 − 1/t) exactly.
            let shrink = 1.0 - 1.0 / t as f64;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                w[n] += eta * y;
            }
            for (sj, wj) in w_sum.iter_mut().zip(&w) {
                *sj += *wj;
            }
        }
        let avg: Vec<f64> = w_sum.iter().map(|s| s / t as f64).collect();
        epoch_objectives.push(primal_objective(rows, labels_pm, &avg[..n], avg[n], c));
    }

    let avg: Vec<f64> = w_sum.iter().map(|s| s / t as f64).collect();
    let (weights, bias) = scale_polish(rows, labels_pm, &avg[..n], avg[n], c);
    PegasosFit { weights, bias, epoch_objectives }
}

/// Exact minimization of `φ(s) = ½s²‖w‖² + C·Σ max(0, 1 − s·mᵢ)` over s ≥ 0
/// (mᵢ = y·(w·x + b)): φ is convex piecewise-quadratic, so scanning the
/// breakpoints 1/mᵢ and the per-segment stationary points finds the global
/// minimum. Returns the rescaled (w, b).
fn scale_polish(
    rows: &[Vec<f64>],
    labels_pm: &[f64],
    w: &[f64],
    b: f64,
    c: f64,
) -> (Vec<f64>, f64) {
    let w_norm2 = dot(w, w);
    if w_norm2 == 0.0 {
        return (w.to_vec(), b);
    }
    let margins: Vec<f64> = rows
        .iter()
        .zip(labels_pm)
        .map(|(x, y)| y * (dot(w, x) + b))
        .collect();

    let phi = |s: f64| -> f64 {
        0.5 * s * s * w_norm2 + c * margins.iter().map(|m| (1.0 - s * m).max(0.0)).sum::<f64>()
    };

    let mut breaks: Vec<f64> = margins
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| 1.0 / m)
        .collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();

    let mut best_s = 1.0;
    let mut best_phi = phi(1.0);
    let mut consider = |s: f64| {
        if s >= 0.0 {
            let v = phi(s);
            if v < best_phi {
                best_phi = v;
                best_s = s;
            }
        }
    };

    // A segment's active hinge set is fixed, so its stationary point is
    // s* = C·Σ_active mᵢ / ‖w‖²; probe it inside each segment plus every
    // breakpoint (segment ends). The final segment extends to +∞ where the
    // active sum only contains non-positive margins, making φ increasing.
    for (k, &s_lo) in breaks.iter().enumerate() {
        consider(s_lo);
        let s_hi = breaks.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let probe = 0.5 * (s_lo + s_hi.min(s_lo + 1.0));
        let active_sum: f64 = margins.iter().filter(|&&m| probe * m < 1.0).map(|&m| m).sum();
        let s_star = c * active_sum / w_norm2;
        if s_star > s_lo && s_star < s_hi {
            consider(s_star);
        }
    }

    (w.iter().map(|wj| wj * best_s).collect(), b * best_s)
}
