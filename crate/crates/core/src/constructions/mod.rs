//! Constructions of compound p-values: averaging null CDFs, decreasing
//! densities, permutation and Monte Carlo pooling, weighted p-values, Gaussian
//! means, and data alignment.
//!
//! Each construction only produces values in `[0, 1]`; validity (in the
//! averaged, compound sense) is what the simulation suites verify empirically.

mod decreasing;
mod pooling;

pub use decreasing::{decreasing_density_pvalues, decreasing_density_weights, DensityWeights};
pub use pooling::{
    mc_pooled_pvalues, permutation_pooled_pvalues, pooled_pvalues, single_trial_pvalue,
    trial_null_batch, trial_null_stats, PooledNull, Trial, TrialNull, DEFAULT_EXACT_CAP,
    MC_ASSIGNMENTS,
};

use crate::bh::PValueVector;
use crate::error::{Error, Result};
use crate::numerics::{normal_sf, reg_inc_beta, Probability};

/// Whether a bank's evaluators are left CDFs F_j (nondecreasing) or right
/// tails F̄_j (nonincreasing).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    LeftCdf,
    RightTail,
}

type CdfFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bank of m monotone evaluators, one per hypothesis, mapping a statistic
/// value into `[0, 1]`.
pub struct CdfBank {
    evaluators: Vec<CdfFn>,
    orientation: Orientation,
}

impl CdfBank {
    pub fn new(evaluators: Vec<CdfFn>, orientation: Orientation) -> Self {
        CdfBank {
            evaluators,
            orientation,
        }
    }

    pub fn len(&self) -> usize {
        self.evaluators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluators.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// p_i = (1/m) Σ_j bank_j(stat_i), the average-of-null-CDFs construction.
///
/// With all evaluators equal to one left CDF this reduces to the classical
/// probability integral transform.
pub fn avg_null_cdf_pvalues(stats: &[f64], bank: &CdfBank) -> Result<PValueVector> {
    let m = stats.len();
    if bank.len() != m {
        return Err(Error::length(format!(
            "bank has {} evaluators for {m} statistics",
            bank.len()
        )));
    }
    let values = stats
        .iter()
        .map(|&x| {
            let sum: f64 = bank.evaluators.iter().map(|f| f(x)).sum();
            (sum / m as f64).clamp(0.0, 1.0)
        })
        .collect();
    PValueVector::new(values)
}

/// Weighted p-values p_i = min(p*_i / w_i, 1) for positive weights summing
/// to m.
pub fn weighted_pvalues(pstar: &PValueVector, weights: &[f64]) -> Result<PValueVector> {
    let m = pstar.len();
    if weights.len() != m {
        return Err(Error::length(format!(
            "{} weights for {m} p-values",
            weights.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::domain(format!(
                "weight at index {i} not positive: {w}"
            )));
        }
        sum += w;
    }
    if (sum - m as f64).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "weights must sum to m={m}, got {sum}"
        )));
    }
    let values = pstar
        .values()
        .iter()
        .zip(weights)
        .map(|(&p, &w)| (p / w).min(1.0))
        .collect();
    PValueVector::new(values)
}

/// Per-test summary for the Gaussian-means construction: sample mean, sample
/// variance, and the common per-test sample size n ≥ 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSummary {
    pub ybar: f64,
    pub s2: f64,
    pub n: usize,
}

impl GaussianSummary {
    pub fn new(ybar: f64, s2: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!(
                "gaussian summary needs n >= 3 (Beta shape n/2 - 1 must be positive), got n={n}"
            )));
        }
        if !s2.is_finite() || s2 <= 0.0 || !ybar.is_finite() {
            return Err(Error::domain(format!(
                "gaussian summary needs finite ybar and positive s2, got ybar={ybar}, s2={s2}"
            )));
        }
        Ok(GaussianSummary { ybar, s2, n })
    }
}

/// Compound p-values for testing Gaussian means with unknown variances:
/// p_i = (1/m) Σ_j (1 − F_Beta(1/2, n/2−1)(n·ȳ_i² / ((n−1)·s_j²))).
///
/// All summaries must share the same n; heterogeneous sample sizes are
/// rejected rather than guessed at.
pub fn gaussian_means_pvalues(summaries: &[GaussianSummary]) -> Result<PValueVector> {
    if summaries.is_empty() {
        return Err(Error::domain("gaussian_means: no summaries given"));
    }
    let n = summaries[0].n;
    if summaries.iter().any(|s| s.n != n) {
        return Err(Error::domain(
            "gaussian_means: all summaries must share the same n",
        ));
    }
    let m = summaries.len();
    let a = 0.5;
    let b = n as f64 / 2.0 - 1.0;
    let mut values = Vec::with_capacity(m);
    for si in summaries {
        let num = n as f64 * si.ybar * si.ybar;
        let mut sum = 0.0;
        for sj in summaries {
            let x = (num / ((n as f64 - 1.0) * sj.s2)).min(1.0);
            sum += 1.0 - reg_inc_beta(x, a, b)?.get();
        }
        values.push((sum / m as f64).clamp(0.0, 1.0));
    }
    PValueVector::new(values)
}

/// Compound p-values for data alignment under known additive noise:
/// p_i = (1/m) Σ_j noise_sf(T(x̃_i), x_j), where noise_sf(t, x_j) is the
/// probability that T(x_j + ω) ≥ t under the noise law.
pub fn alignment_pooled_pvalues<V>(
    x_unlabeled: &[V],
    x_tilde: &[V],
    noise_sf: impl Fn(f64, &V) -> Probability,
    t_fn: impl Fn(&V) -> f64,
) -> Result<PValueVector> {
    let m = x_unlabeled.len();
    if x_tilde.len() != m {
        return Err(Error::length(format!(
            "{} labeled entries for {m} unlabeled entries",
            x_tilde.len()
        )));
    }
    let values = x_tilde
        .iter()
        .map(|xt| {
            let t = t_fn(xt);
            let sum: f64 = x_unlabeled.iter().map(|xj| noise_sf(t, xj).get()).sum();
            (sum / m as f64).clamp(0.0, 1.0)
        })
        .collect();
    PValueVector::new(values)
}

/// Normal-noise survival helper for alignment with scalar features and an
/// identity statistic: P(x_j + ω ≥ t) for ω standard normal.
pub fn normal_noise_sf(t: f64, x_j: &f64) -> Probability {
    normal_sf(t - x_j).expect("finite inputs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avg_cdf_reduces_to_pit() {
        // One shared left CDF: p_i = F(x_i).
        let bank = CdfBank::new(
            (0..3)
                .map(|_| Box::new(|x: f64| x.clamp(0.0, 1.0)) as CdfFn)
                .collect(),
            Orientation::LeftCdf,
        );
        let p = avg_null_cdf_pvalues(&[0.2, 0.7, 0.4], &bank).unwrap();
        for (got, want) in p.values().iter().zip([0.2, 0.7, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn avg_cdf_hand_example() {
        let bank = CdfBank::new(
            vec![
                Box::new(|x: f64| (1.0 - x).max(0.0)) as CdfFn,
                Box::new(|x: f64| (1.0 - x / 2.0).max(0.0)) as CdfFn,
            ],
            Orientation::RightTail,
        );
        let p = avg_null_cdf_pvalues(&[1.0, 3.0], &bank).unwrap();
        assert!((p.values()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn avg_cdf_degenerate_bank() {
        let bank = CdfBank::new(
            (0..2).map(|_| Box::new(|_: f64| 1.0) as CdfFn).collect(),
            Orientation::RightTail,
        );
        let p = avg_null_cdf_pvalues(&[5.0, -2.0], &bank).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0]);
    }

    #[test]
    fn avg_cdf_length_mismatch() {
        let bank = CdfBank::new(
            (0..2).map(|_| Box::new(|_: f64| 1.0) as CdfFn).collect(),
            Orientation::RightTail,
        );
        assert!(avg_null_cdf_pvalues(&[1.0], &bank).is_err());
    }

    #[test]
    fn weighted_pvalues_cases() {
        let p = PValueVector::new(vec![0.3, 0.9]).unwrap();
        let unweighted = weighted_pvalues(&p, &[1.0, 1.0]).unwrap();
        assert_eq!(unweighted.values(), p.values());
        // An up-weighted test halves its p-value, compensated elsewhere.
        let p3 = PValueVector::new(vec![0.3, 0.9, 0.9]).unwrap();
        let weighted = weighted_pvalues(&p3, &[2.0, 0.5, 0.5]).unwrap();
        assert!((weighted.values()[0] - 0.15).abs() < 1e-15);
        // Clamp: p*/w above one saturates.
        let clamped = weighted_pvalues(&p, &[1.5, 0.5]).unwrap();
        assert_eq!(clamped.values()[1], 1.0);
        assert!(weighted_pvalues(&p, &[0.5, 0.5]).is_err());
        assert!(weighted_pvalues(&p, &[-1.0, 3.0]).is_err());
    }

    #[test]
    fn gaussian_means_zero_mean_gives_one() {
        let summaries = vec![
            GaussianSummary::new(0.0, 1.3, 5).unwrap(),
            GaussianSummary::new(0.0, 0.4, 5).unwrap(),
        ];
        let p = gaussian_means_pvalues(&summaries).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0]);
    }

    #[test]
    fn gaussian_means_single_test_self_pools() {
        let s = GaussianSummary::new(0.8, 1.1, 5).unwrap();
        let p = gaussian_means_pvalues(&[s]).unwrap();
        let x = 5.0 * 0.64 / (4.0 * 1.1);
        let expect = 1.0 - reg_inc_beta(x, 0.5, 1.5).unwrap().get();
        assert!((p.values()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn gaussian_means_rejects_small_or_mixed_n() {
        assert!(GaussianSummary::new(0.0, 1.0, 2).is_err());
        let a = GaussianSummary::new(0.0, 1.0, 5).unwrap();
        let b = GaussianSummary::new(0.0, 1.0, 6).unwrap();
        assert!(gaussian_means_pvalues(&[a, b]).is_err());
    }

    #[test]
    fn alignment_identity_cases() {
        // Single entry, standard normal noise, identity statistic.
        let p = alignment_pooled_pvalues(&[0.0], &[0.0], normal_noise_sf, |&x| x).unwrap();
        assert_eq!(p.values()[0], 0.5);
        // Far-right observation: p tends to zero.
        let p = alignment_pooled_pvalues(&[0.0], &[40.0], normal_noise_sf, |&x| x).unwrap();
        assert!(p.values()[0] < 1e-12);
        // Two-entry hand value.
        let p =
            alignment_pooled_pvalues(&[0.0, 1.0], &[1.0, 0.0], normal_noise_sf, |&x| x).unwrap();
        let expect = (normal_sf(1.0).unwrap().get() + 0.5) / 2.0;
        assert!((p.values()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn alignment_length_mismatch() {
        assert!(alignment_pooled_pvalues(&[0.0], &[], normal_noise_sf, |&x| x).is_err());
    }
}
