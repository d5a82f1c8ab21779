//! The Benjamini–Hochberg step-up procedure, its leave-one-out reformulation,
//! and the false-discovery metrics evaluated on its output.
//!
//! Indices are 0-based throughout the Rust API; serialized outputs (scenario
//! JSON, CLI reports) are 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// A vector of p-values: every entry in `[0, 1]`, length at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector(Vec<f64>);

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("p-value vector must be nonempty"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "p-value at index {i} outside [0,1]: {v}"
                )));
            }
        }
        Ok(PValueVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// The set of true-null indices (0-based), fixed against a known length m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullMask {
    mask: Vec<bool>,
    count: usize,
}

impl NullMask {
    pub fn new(m: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; m];
        let mut count = 0;
        for idx in members {
            if idx >= m {
                return Err(Error::domain(format!(
                    "null index {idx} out of range for m={m}"
                )));
            }
            if !mask[idx] {
                mask[idx] = true;
                count += 1;
            }
        }
        Ok(NullMask { mask, count })
    }

    pub fn empty(m: usize) -> Self {
        NullMask {
            mask: vec![false; m],
            count: 0,
        }
    }

    pub fn full(m: usize) -> Self {
        NullMask {
            mask: vec![true; m],
            count: m,
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask.get(idx).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn m(&self) -> usize {
        self.mask.len()
    }

    /// Member indices in increasing order (0-based).
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Output of the BH procedure at a given level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    /// Rejected indices in increasing order (0-based).
    pub rejected: Vec<usize>,
    /// Number of rejections, k̂.
    pub k_hat: usize,
    /// The realized rejection threshold α·k̂/m (0 when nothing is rejected).
    pub threshold: f64,
}

/// The leave-one-out reformulation of BH: the sequence k_0 ≤ … ≤ k_{|H0|} of
/// rejection counts as a function of how many nulls fall below threshold, and
/// the realized null-rejection count I.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub k_seq: Vec<usize>,
    pub i_star: usize,
}

/// Relaxation parameters (ε, δ) for approximately valid p-value families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl ApproxParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || delta.is_nan() || epsilon < 0.0 || delta < 0.0 {
            return Err(Error::domain(format!(
                "approx params must be nonnegative, got epsilon={epsilon}, delta={delta}"
            )));
        }
        Ok(ApproxParams { epsilon, delta })
    }

    pub const EXACT: ApproxParams = ApproxParams {
        epsilon: 0.0,
        delta: 0.0,
    };
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha outside [0,1]: {alpha}")));
    }
    Ok(())
}

/// BH threshold for rejection count `k`. Scenario constructors use this exact
/// expression for atom values, so ties at the threshold compare equal in
/// floating point.
#[inline]
pub fn bh_threshold(alpha: f64, k: usize, m: usize) -> f64 {
    alpha * k as f64 / m as f64
}

/// The BH procedure at level `alpha`: k̂ is the largest k with at least k
/// p-values ≤ αk/m, and everything at or below αk̂/m is rejected.
pub fn bh_reject(p: &PValueVector, alpha: f64) -> Result<BhResult> {
    check_alpha(alpha)?;
    let m = p.len();
    let mut sorted: Vec<f64> = p.values().to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated non-NaN"));
    let mut k_hat = 0;
    for k in (1..=m).rev() {
        if sorted[k - 1] <= bh_threshold(alpha, k, m) {
            k_hat = k;
            break;
        }
    }
    if k_hat == 0 {
        return Ok(BhResult {
            rejected: Vec::new(),
            k_hat: 0,
            threshold: 0.0,
        });
    }
    let threshold = bh_threshold(alpha, k_hat, m);
    let rejected: Vec<usize> = p
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v <= threshold).then_some(i))
        .collect();
    debug_assert_eq!(rejected.len(), k_hat);
    Ok(BhResult {
        rejected,
        k_hat,
        threshold,
    })
}

/// The reformulated procedure: k_i is the total rejection count if exactly i
/// nulls fall below threshold, and I = max{i : at least i null p-values are
/// ≤ αk_i/m}. Satisfies k_I = k̂ and I = |rejections ∩ nulls|.
pub fn bh_crosscheck(p: &PValueVector, alpha: f64, h0: &NullMask) -> Result<CrossCheck> {
    check_alpha(alpha)?;
    let m = p.len();
    if h0.m() != m {
        return Err(Error::length(format!(
            "null mask sized {} against {m} p-values",
            h0.m()
        )));
    }
    let mut nonnull: Vec<f64> = Vec::with_capacity(m - h0.len());
    let mut null: Vec<f64> = Vec::with_capacity(h0.len());
    for (i, &v) in p.values().iter().enumerate() {
        if h0.contains(i) {
            null.push(v);
        } else {
            nonnull.push(v);
        }
    }
    nonnull.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated non-NaN"));
    null.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated non-NaN"));

    // count_at[k] = #{non-null j : p_j <= alpha*k/m} for k in 1..=m.
    let count_at = |k: usize| -> usize {
        let t = bh_threshold(alpha, k, m);
        nonnull.partition_point(|&v| v <= t)
    };

    let n0 = h0.len();
    let mut k_seq = vec![0usize; n0 + 1];
    for (i, slot) in k_seq.iter_mut().enumerate() {
        let mut best = 0;
        for k in (1..=m).rev() {
            if i + count_at(k) >= k {
                best = k;
                break;
            }
        }
        *slot = best;
    }
    let mut i_star = 0;
    for i in (1..=n0).rev() {
        let t = bh_threshold(alpha, k_seq[i], m);
        if null.partition_point(|&v| v <= t) >= i {
            i_star = i;
            break;
        }
    }
    Ok(CrossCheck { k_seq, i_star })
}

/// False discovery proportion |S ∩ H0| / max(1, |S|).
pub fn fdp(rejected: &[usize], h0: &NullMask) -> f64 {
    let false_hits = rejected.iter().filter(|&&i| h0.contains(i)).count();
    false_hits as f64 / (rejected.len().max(1)) as f64
}

/// Modified FDP |S ∩ H0| / (mδ/(α(1+ε)) + |S|), the quantity bounded for
/// (ε, δ)-approximate families. Reduces to `fdp` when δ = 0 and S is
/// nonempty; an empty rejection set always scores zero.
pub fn modified_fdp(
    rejected: &[usize],
    h0: &NullMask,
    m: usize,
    alpha: f64,
    params: ApproxParams,
) -> Result<f64> {
    if params.delta > 0.0 && alpha == 0.0 {
        return Err(Error::domain(
            "modified_fdp: alpha must be positive when delta > 0",
        ));
    }
    let false_hits = rejected.iter().filter(|&&i| h0.contains(i)).count();
    let shift = if params.delta > 0.0 {
        m as f64 * params.delta / (alpha * (1.0 + params.epsilon))
    } else {
        0.0
    };
    let denom = shift + rejected.len() as f64;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(false_hits as f64 / denom)
}

/// Harmonic number h_m = 1 + 1/2 + … + 1/m.
pub fn harmonic(m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::domain("harmonic: m must be at least 1"));
    }
    let mut acc = KahanSum::default();
    for k in 1..=m {
        acc.add(1.0 / k as f64);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(values: &[f64]) -> PValueVector {
        PValueVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_nothing_when_all_ones() {
        let res = bh_reject(&pv(&[1.0, 1.0, 1.0]), 0.5).unwrap();
        assert_eq!(res.k_hat, 0);
        assert!(res.rejected.is_empty());
        assert_eq!(res.threshold, 0.0);
    }

    #[test]
    fn hand_stepped_example() {
        let res = bh_reject(&pv(&[0.01, 0.02, 0.9]), 0.05).unwrap();
        assert_eq!(res.k_hat, 2);
        assert_eq!(res.rejected, vec![0, 1]);
        assert_eq!(res.threshold, bh_threshold(0.05, 2, 3));
    }

    #[test]
    fn empty_vector_is_rejected() {
        assert!(PValueVector::new(vec![]).is_err());
    }

    #[test]
    fn out_of_range_pvalue_is_rejected() {
        assert!(PValueVector::new(vec![0.5, 1.2]).is_err());
        assert!(PValueVector::new(vec![0.5, -0.1]).is_err());
        assert!(PValueVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn step_up_maximality() {
        let p = pv(&[0.01, 0.02, 0.04, 0.3, 0.9, 0.11]);
        let alpha = 0.2;
        let res = bh_reject(&p, alpha).unwrap();
        let m = p.len();
        for k in (res.k_hat + 1)..=m {
            let t = bh_threshold(alpha, k, m);
            let count = p.values().iter().filter(|&&v| v <= t).count();
            assert!(count < k, "k={k} should fail the step-up condition");
        }
    }

    #[test]
    fn ties_at_threshold_are_all_rejected() {
        // Both entries sit exactly at alpha*2/m.
        let m = 4;
        let alpha = 0.1;
        let t = bh_threshold(alpha, 2, m);
        let res = bh_reject(&pv(&[t, t, 0.9, 0.9]), alpha).unwrap();
        assert_eq!(res.k_hat, 2);
        assert_eq!(res.rejected, vec![0, 1]);
    }

    #[test]
    fn crosscheck_hand_example() {
        let p = pv(&[0.01, 0.02, 0.9]);
        let h0 = NullMask::new(3, [2]).unwrap();
        let cc = bh_crosscheck(&p, 0.05, &h0).unwrap();
        assert_eq!(cc.k_seq, vec![2, 3]);
        assert_eq!(cc.i_star, 0);
        let bh = bh_reject(&p, 0.05).unwrap();
        assert_eq!(cc.k_seq[cc.i_star], bh.k_hat);
    }

    #[test]
    fn crosscheck_without_nulls() {
        let p = pv(&[0.01, 0.02, 0.9]);
        let h0 = NullMask::empty(3);
        let cc = bh_crosscheck(&p, 0.05, &h0).unwrap();
        assert_eq!(cc.i_star, 0);
        assert_eq!(cc.k_seq, vec![bh_reject(&p, 0.05).unwrap().k_hat]);
    }

    #[test]
    fn crosscheck_invariants_hold() {
        let p = pv(&[0.02, 0.5, 0.013, 0.9, 0.04, 0.2]);
        let h0 = NullMask::new(6, [1, 3, 4]).unwrap();
        let cc = bh_crosscheck(&p, 0.3, &h0).unwrap();
        for (i, &k) in cc.k_seq.iter().enumerate() {
            if i > 0 {
                assert!(k >= i, "k_{i} = {k} must be at least {i}");
                assert!(cc.k_seq[i - 1] <= k, "k sequence must be nondecreasing");
            }
        }
        let bh = bh_reject(&p, 0.3).unwrap();
        assert_eq!(cc.k_seq[cc.i_star], bh.k_hat);
        assert_eq!(cc.i_star, fdp_count(&bh.rejected, &h0));
    }

    fn fdp_count(rejected: &[usize], h0: &NullMask) -> usize {
        rejected.iter().filter(|&&i| h0.contains(i)).count()
    }

    #[test]
    fn fdp_conventions() {
        let h0 = NullMask::new(5, [0, 1, 2]).unwrap();
        assert_eq!(fdp(&[], &h0), 0.0);
        assert_eq!(fdp(&[0, 3], &h0), 0.5);
        assert_eq!(fdp(&[0, 1, 2], &h0), 1.0);
    }

    #[test]
    fn modified_fdp_reduces_and_shifts() {
        let h0 = NullMask::new(10, [0, 1]).unwrap();
        let rejected = [0usize, 1, 5, 6];
        let exact = modified_fdp(&rejected, &h0, 10, 0.5, ApproxParams::EXACT).unwrap();
        assert_eq!(exact, fdp(&rejected, &h0));
        let shifted = modified_fdp(
            &rejected,
            &h0,
            10,
            0.5,
            ApproxParams::new(0.0, 0.05).unwrap(),
        )
        .unwrap();
        assert!((shifted - 0.4).abs() < 1e-15);
        assert_eq!(
            modified_fdp(&[], &h0, 10, 0.5, ApproxParams::EXACT).unwrap(),
            0.0
        );
        assert!(modified_fdp(&[], &h0, 10, 0.0, ApproxParams::new(0.0, 0.1).unwrap()).is_err());
    }

    #[test]
    fn modified_fdp_never_exceeds_fdp() {
        let h0 = NullMask::new(8, [0, 2, 4, 6]).unwrap();
        let rejected = [0usize, 1, 2, 7];
        let plain = fdp(&rejected, &h0);
        for eps in [0.0, 0.3, 1.0] {
            for delta in [0.0, 0.01, 0.2] {
                let modified = modified_fdp(
                    &rejected,
                    &h0,
                    8,
                    0.4,
                    ApproxParams::new(eps, delta).unwrap(),
                )
                .unwrap();
                assert!(modified <= plain + 1e-15, "eps={eps} delta={delta}");
            }
        }
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert!((harmonic(3).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        assert!((harmonic(100).unwrap() - 5.187_377_517_639_62).abs() < 1e-12);
        assert!(harmonic(0).is_err());
    }
}
