//! Pooled-null p-values from permutation tests and Monte Carlo draws.
//!
//! Group-assignment statistics make the average over all n! permutations
//! collapse to an average over C(n, n1) treated subsets, so exact enumeration
//! stays feasible for small trials; larger trials fall back to seeded Monte
//! Carlo assignment sampling.

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::bh::PValueVector;
use crate::error::{Error, Result};
use crate::rng::substream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Enumerate exactly up to this many assignments per trial by default.
pub const DEFAULT_EXACT_CAP: u64 = 20_000;
/// Number of sampled assignments when a trial exceeds the exact cap.
pub const MC_ASSIGNMENTS: usize = 10_000;

/// One two-group trial: `units[..n_treated]` are the treated units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<U> {
    units: Vec<U>,
    n_treated: usize,
}

impl<U> Trial<U> {
    pub fn new(units: Vec<U>, n_treated: usize) -> Result<Self> {
        let n = units.len();
        if n_treated == 0 || n_treated >= n {
            return Err(Error::domain(format!(
                "trial must have both groups nonempty: n={n}, n_treated={n_treated}"
            )));
        }
        Ok(Trial { units, n_treated })
    }

    pub fn units(&self) -> &[U] {
        &self.units
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    pub fn treated(&self) -> &[U] {
        &self.units[..self.n_treated]
    }

    pub fn control(&self) -> &[U] {
        &self.units[self.n_treated..]
    }
}

/// The null statistics of one trial under group relabeling, equally weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialNull {
    pub stats: Vec<f64>,
    /// True when the assignments were Monte Carlo sampled rather than fully
    /// enumerated.
    pub approximated: bool,
}

/// C(n, k) capped at `cap + 1` to keep the comparison overflow-free.
fn binomial_capped(n: usize, k: usize, cap: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    let limit = cap as u128 + 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > limit {
            return cap + 1;
        }
    }
    acc.min(limit) as u64
}

/// All null statistics of `trial`: the statistic evaluated with each treated
/// subset, enumerated exactly when C(n, n1) ≤ `exact_cap`, else sampled
/// `MC_ASSIGNMENTS` times from `rng`.
pub fn trial_null_stats<U: Clone>(
    trial: &Trial<U>,
    statistic: &(impl Fn(&Trial<U>) -> f64 + ?Sized),
    exact_cap: u64,
    rng: &mut impl RngCore,
) -> TrialNull {
    let n = trial.n();
    let k = trial.n_treated();
    let count = binomial_capped(n, k, exact_cap);
    let mut scratch: Vec<U> = Vec::with_capacity(n);
    let mut eval_subset = |subset: &[usize]| -> f64 {
        scratch.clear();
        let chosen: Vec<bool> = {
            let mut mask = vec![false; n];
            for &i in subset {
                mask[i] = true;
            }
            mask
        };
        for &i in subset {
            scratch.push(trial.units[i].clone());
        }
        for (i, unit) in trial.units.iter().enumerate() {
            if !chosen[i] {
                scratch.push(unit.clone());
            }
        }
        let relabeled = Trial {
            units: std::mem::take(&mut scratch),
            n_treated: k,
        };
        let value = statistic(&relabeled);
        scratch = relabeled.units;
        value
    };

    if count <= exact_cap {
        let mut stats = Vec::with_capacity(count as usize);
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            stats.push(eval_subset(&subset));
            // Next k-combination of 0..n in lexicographic order.
            let mut i = k;
            loop {
                if i == 0 {
                    return TrialNull {
                        stats,
                        approximated: false,
                    };
                }
                i -= 1;
                if subset[i] != i + n - k {
                    break;
                }
            }
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
        }
    } else {
        let mut indices: Vec<usize> = (0..n).collect();
        let mut stats = Vec::with_capacity(MC_ASSIGNMENTS);
        for _ in 0..MC_ASSIGNMENTS {
            let (subset, _) = indices.partial_shuffle(rng, k);
            let mut subset = subset.to_vec();
            subset.sort_unstable();
            stats.push(eval_subset(&subset));
        }
        TrialNull {
            stats,
            approximated: true,
        }
    }
}

/// Pooled null distribution over all trials: each trial's null statistics
/// sorted, answering inclusive right-tail queries by per-trial binary search.
///
/// Fractions are formed per trial from integer counts, so equally weighted
/// ties (like the all-mass-counts case) come out exact.
#[derive(Debug, Clone)]
pub struct PooledNull {
    sorted: Vec<Vec<f64>>,
}

impl PooledNull {
    pub fn build(nulls: &[TrialNull]) -> Self {
        let sorted = nulls
            .iter()
            .map(|t| {
                let mut s = t.stats.clone();
                s.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
                s
            })
            .collect();
        PooledNull { sorted }
    }

    /// (1/m) Σ_j (fraction of trial-j null statistics ≥ t).
    pub fn pooled_fraction_geq(&self, t: f64) -> f64 {
        let mut acc = crate::numerics::KahanSum::default();
        for stats in &self.sorted {
            let geq = stats.len() - stats.partition_point(|&v| v < t);
            acc.add(geq as f64 / stats.len() as f64);
        }
        (acc.value() / self.sorted.len() as f64).clamp(0.0, 1.0)
    }
}

/// Classical single-trial p-value: the weighted fraction of the trial's own
/// null statistics at or above `t_obs`.
pub fn single_trial_pvalue(null: &TrialNull, t_obs: f64) -> f64 {
    let hits = null.stats.iter().filter(|&&v| v >= t_obs).count();
    hits as f64 / null.stats.len() as f64
}

/// Pooled compound p-values for precomputed observed statistics and per-trial
/// null distributions.
pub fn pooled_pvalues(nulls: &[TrialNull], observed: &[f64]) -> Result<PValueVector> {
    if nulls.len() != observed.len() {
        return Err(Error::length(format!(
            "{} null distributions for {} observed statistics",
            nulls.len(),
            observed.len()
        )));
    }
    let pooled = PooledNull::build(nulls);
    PValueVector::new(
        observed
            .iter()
            .map(|&t| pooled.pooled_fraction_geq(t))
            .collect(),
    )
}

/// Null statistics for every trial, enumerated or sampled per trial. Trial j
/// draws its Monte Carlo assignments (when it needs any) from substream j of
/// `seed`, so the result is deterministic whatever the worker count.
pub fn trial_null_batch<U, F>(
    trials: &[Trial<U>],
    statistic: &F,
    exact_cap: u64,
    seed: u64,
) -> Result<Vec<TrialNull>>
where
    U: Clone + Send + Sync,
    F: Fn(&Trial<U>) -> f64 + Sync,
{
    if exact_cap == 0 {
        return Err(Error::domain("exact_cap must be at least 1"));
    }
    if trials.is_empty() {
        return Err(Error::domain(
            "permutation pooling needs at least one trial",
        ));
    }
    Ok(map_trials(trials, |j, trial| {
        let mut rng = substream(seed, j as u64);
        trial_null_stats(trial, statistic, exact_cap, &mut rng)
    }))
}

/// Compound p-values pooling permutation nulls across trials:
/// p_i = (1/m) Σ_j (fraction of trial-j relabeled statistics ≥ T_i).
pub fn permutation_pooled_pvalues<U, F>(
    trials: &[Trial<U>],
    statistic: F,
    exact_cap: u64,
    seed: u64,
) -> Result<PValueVector>
where
    U: Clone + Send + Sync,
    F: Fn(&Trial<U>) -> f64 + Sync,
{
    let nulls = trial_null_batch(trials, &statistic, exact_cap, seed)?;
    let observed: Vec<f64> = trials.iter().map(&statistic).collect();
    pooled_pvalues(&nulls, &observed)
}

#[cfg(feature = "parallel")]
fn map_trials<U, T: Send>(trials: &[Trial<U>], f: impl Fn(usize, &Trial<U>) -> T + Sync) -> Vec<T>
where
    U: Clone + Send + Sync,
{
    trials
        .par_iter()
        .enumerate()
        .map(|(j, t)| f(j, t))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_trials<U, T: Send>(trials: &[Trial<U>], f: impl Fn(usize, &Trial<U>) -> T + Sync) -> Vec<T>
where
    U: Clone + Send + Sync,
{
    trials.iter().enumerate().map(|(j, t)| f(j, t)).collect()
}

/// Compound p-values pooling Monte Carlo nulls across tests:
/// p_i = (1/m) Σ_j (1{T_j ≥ t_i} + Σ_k 1{T_jk ≥ t_i}) / (1+K).
pub fn mc_pooled_pvalues(t_obs: &[f64], t_null: &[Vec<f64>]) -> Result<PValueVector> {
    let m = t_obs.len();
    if t_null.len() != m {
        return Err(Error::length(format!(
            "{} null lists for {m} observed statistics",
            t_null.len()
        )));
    }
    let k = t_null.first().map(|l| l.len()).unwrap_or(0);
    if k == 0 {
        return Err(Error::domain(
            "mc pooling needs at least one null draw per test",
        ));
    }
    if t_null.iter().any(|l| l.len() != k) {
        return Err(Error::length(
            "all Monte Carlo null lists must have the same length".to_string(),
        ));
    }
    let nulls: Vec<TrialNull> = t_obs
        .iter()
        .zip(t_null)
        .map(|(&obs, draws)| {
            let mut stats = Vec::with_capacity(k + 1);
            stats.push(obs);
            stats.extend_from_slice(draws);
            TrialNull {
                stats,
                approximated: false,
            }
        })
        .collect();
    pooled_pvalues(&nulls, t_obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diff_of_means(t: &Trial<f64>) -> f64 {
        let treated: f64 = t.treated().iter().sum::<f64>() / t.n_treated() as f64;
        let control: f64 = t.control().iter().sum::<f64>() / (t.n() - t.n_treated()) as f64;
        treated - control
    }

    #[test]
    fn two_unit_trials_hand_example() {
        let trials = vec![
            Trial::new(vec![1.0, 0.0], 1).unwrap(),
            Trial::new(vec![3.0, 0.0], 1).unwrap(),
        ];
        let p = permutation_pooled_pvalues(&trials, diff_of_means, 100, 0).unwrap();
        assert_eq!(p.values(), &[0.5, 0.25]);
    }

    #[test]
    fn single_trial_reduces_to_classical_pvalue() {
        let trial = Trial::new(vec![2.0, 1.3, 0.4, 0.1], 2).unwrap();
        let p = permutation_pooled_pvalues(std::slice::from_ref(&trial), diff_of_means, 100, 0)
            .unwrap();
        // Classical permutation p-value by direct enumeration of C(4,2).
        let mut rng = substream(0, 0);
        let null = trial_null_stats(&trial, &diff_of_means, 100, &mut rng);
        assert!(!null.approximated);
        assert_eq!(null.stats.len(), 6);
        let classical = single_trial_pvalue(&null, diff_of_means(&trial));
        assert_eq!(p.values()[0], classical);
    }

    #[test]
    fn identity_assignment_keeps_pvalues_positive() {
        let trials: Vec<Trial<f64>> = (0..5)
            .map(|i| Trial::new(vec![i as f64 + 10.0, 0.2, 0.1, 0.4], 1).unwrap())
            .collect();
        let p = permutation_pooled_pvalues(&trials, diff_of_means, 100, 0).unwrap();
        for &v in p.values() {
            assert!(v >= 1.0 / (5.0 * 4.0));
        }
    }

    #[test]
    fn invariant_to_within_group_order() {
        let a = vec![
            Trial::new(vec![1.0, 2.0, 0.5, 0.2, 0.9], 2).unwrap(),
            Trial::new(vec![4.0, 0.1, 0.7, 0.3], 2).unwrap(),
        ];
        let b = vec![
            Trial::new(vec![2.0, 1.0, 0.9, 0.5, 0.2], 2).unwrap(),
            Trial::new(vec![4.0, 0.1, 0.3, 0.7], 2).unwrap(),
        ];
        let pa = permutation_pooled_pvalues(&a, diff_of_means, 100, 0).unwrap();
        let pb = permutation_pooled_pvalues(&b, diff_of_means, 100, 0).unwrap();
        assert_eq!(pa.values(), pb.values());
    }

    #[test]
    fn exact_mode_is_deterministic_and_seeded_mc_reproducible() {
        let trials: Vec<Trial<f64>> = (0..4)
            .map(|i| {
                Trial::new(
                    (0..24).map(|u| ((i * 31 + u * 7) % 13) as f64).collect(),
                    12,
                )
                .unwrap()
            })
            .collect();
        // C(24,12) = 2704156 far exceeds the cap: the MC path engages.
        let p1 = permutation_pooled_pvalues(&trials, diff_of_means, 1000, 42).unwrap();
        let p2 = permutation_pooled_pvalues(&trials, diff_of_means, 1000, 42).unwrap();
        assert_eq!(p1.values(), p2.values());
        let p3 = permutation_pooled_pvalues(&trials, diff_of_means, 1000, 43).unwrap();
        assert_ne!(p1.values(), p3.values());
    }

    #[test]
    fn degenerate_trials_are_rejected() {
        assert!(Trial::new(vec![1.0, 2.0], 0).is_err());
        assert!(Trial::new(vec![1.0, 2.0], 2).is_err());
    }

    #[test]
    fn mc_pooled_hand_examples() {
        let p = mc_pooled_pvalues(&[5.0], &[vec![3.0, 7.0]]).unwrap();
        assert!((p.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        // A statistic below every pooled value scores one.
        let p = mc_pooled_pvalues(&[-100.0, 5.0], &[vec![3.0, 7.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(p.values()[0], 1.0);
        // Exchangeable inputs give identical p-values.
        let p = mc_pooled_pvalues(&[2.0, 2.0], &[vec![1.0, 3.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(p.values()[0], p.values()[1]);
    }

    #[test]
    fn mc_pooled_rejects_ragged_nulls() {
        assert!(mc_pooled_pvalues(&[1.0, 2.0], &[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(mc_pooled_pvalues(&[1.0], &[vec![]]).is_err());
    }

    #[test]
    fn binomial_capped_counts() {
        assert_eq!(binomial_capped(6, 3, 100), 20);
        assert_eq!(binomial_capped(24, 12, 1000), 1001);
        assert_eq!(binomial_capped(4, 2, 20000), 6);
    }
}
