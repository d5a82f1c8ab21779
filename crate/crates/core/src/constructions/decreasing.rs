//! Approximate compound p-values for testing "nonincreasing density on
//! [0, ∞)" nulls, obtained as the supremum of convex nonincreasing envelope
//! functions with a bounded gap Δ between consecutive order statistics.
//!
//! The supremum has a closed form: a weight recursion over the order
//! statistics whose tail sums give the p-values.

use crate::bh::PValueVector;
use crate::error::{Error, Result};

/// The gap bound and weight sequence behind the decreasing-density p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityWeights {
    /// Gap bound Δ = log(e·m²)/m, recorded unclamped even when ≥ 1.
    pub delta: f64,
    /// Weights w_0 … w_m; tail sums Σ_{j≥i} w_j are the envelope values at
    /// the order statistics.
    pub w: Vec<f64>,
    /// The sorted sample (ascending).
    pub order_stats: Vec<f64>,
}

fn validate(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::domain("decreasing_density: empty sample"));
    }
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::domain(format!(
                "decreasing_density: entry {i} must be finite and nonnegative, got {v}"
            )));
        }
    }
    Ok(())
}

/// The weight recursion: w_m = Δ, then for i = m−1 … 0,
/// w_i = min{ (1 − Σ_{j>i} w_j) · gap_i / X_(i+1),
///            Δ · gap_i / max_{j=0..i} gap_j }
/// with w_i = 0 on tied order statistics (gap_i = X_(i+1) − X_(i), X_(0) = 0).
///
/// When Δ ≥ 1 (which happens for m ≤ 3) the constraint set admits the
/// constant-one envelope, so w_m is capped at 1 and all earlier weights
/// collapse to 0; `delta` still records the unclamped value.
pub fn decreasing_density_weights(x: &[f64]) -> Result<DensityWeights> {
    validate(x)?;
    let m = x.len();
    let mf = m as f64;
    let delta = (std::f64::consts::E * mf * mf).ln() / mf;

    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated finite"));

    // gaps[i] = X_(i+1) - X_(i) for i = 0..m-1, with X_(0) = 0.
    let mut gaps = Vec::with_capacity(m);
    let mut prev = 0.0;
    for &v in &sorted {
        gaps.push(v - prev);
        prev = v;
    }
    // Running maximum of gaps[0..=i].
    let mut prefix_max = vec![0.0; m];
    let mut running = 0.0f64;
    for (i, &g) in gaps.iter().enumerate() {
        running = running.max(g);
        prefix_max[i] = running;
    }

    let mut w = vec![0.0; m + 1];
    w[m] = delta.min(1.0);
    let mut tail = w[m];
    for i in (0..m).rev() {
        let gap = gaps[i];
        if gap == 0.0 {
            w[i] = 0.0;
            continue;
        }
        // X_(i+1) = sorted[i]; gap > 0 implies it is positive.
        let slack = (1.0 - tail) * gap / sorted[i];
        let gap_bound = delta * gap / prefix_max[i];
        w[i] = slack.min(gap_bound);
        tail += w[i];
    }
    Ok(DensityWeights {
        delta,
        w,
        order_stats: sorted,
    })
}

/// p_i = min(1, Σ_{j = rank(i)}^{m} w_j), where rank(i) is the 1-based
/// position of X_i among the order statistics. Tied inputs receive identical
/// outputs because weights between tied order statistics are zero.
pub fn decreasing_density_pvalues(x: &[f64]) -> Result<PValueVector> {
    let weights = decreasing_density_weights(x)?;
    let m = x.len();
    // tail[r] = sum_{j=r}^{m} w_j for r = 1..=m.
    let mut tail = vec![0.0; m + 1];
    let mut acc = weights.w[m];
    tail[m] = acc;
    for r in (1..m).rev() {
        acc += weights.w[r];
        tail[r] = acc;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("validated finite"));
    let mut values = vec![0.0; m];
    for (pos, &idx) in order.iter().enumerate() {
        values[idx] = tail[pos + 1].min(1.0);
    }
    PValueVector::new(values)
}
