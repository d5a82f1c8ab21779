//! Statistical validity checks for the pooled constructions: under simulated
//! global nulls the empirical averaged CDF of the p-values must stay below
//! the compound (or approximately compound) validity line.

use compound_bh::constructions::{
    gaussian_means_pvalues, mc_pooled_pvalues, permutation_pooled_pvalues, GaussianSummary, Trial,
};
use compound_bh::numerics::{normal_sf, reg_inc_beta};
use compound_bh::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn diff_of_means(t: &Trial<f64>) -> f64 {
    let treated: f64 = t.treated().iter().sum::<f64>() / t.n_treated() as f64;
    let control: f64 = t.control().iter().sum::<f64>() / (t.n() - t.n_treated()) as f64;
    treated - control
}

/// Mean and standard error of per-replicate fractions.
fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn permutation_pooling_is_compound_valid_under_global_null() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (m, n, reps) = (60usize, 6usize, 120usize);
    let grid = [0.01, 0.05, 0.1, 0.2, 0.5];
    let mut fractions = vec![Vec::with_capacity(reps); grid.len()];
    for rep in 0..reps {
        let mut rng = substream(9001, rep as u64);
        let trials: Vec<Trial<f64>> = (0..m)
            .map(|_| Trial::new((0..n).map(|_| normal.sample(&mut rng)).collect(), n / 2).unwrap())
            .collect();
        let p = permutation_pooled_pvalues(&trials, diff_of_means, 20_000, rep as u64).unwrap();
        for (gi, &t) in grid.iter().enumerate() {
            let frac = p.values().iter().filter(|&&v| v <= t).count() as f64 / m as f64;
            fractions[gi].push(frac);
        }
    }
    for (gi, &t) in grid.iter().enumerate() {
        let (mean, se) = mean_se(&fractions[gi]);
        assert!(
            mean <= t + 3.0 * se,
            "t={t}: mean {mean}, se {se} violates compound validity"
        );
    }
}

#[test]
fn mc_pooling_is_compound_valid_under_exchangeable_nulls() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (m, k, reps) = (60usize, 9usize, 150usize);
    let grid = [0.05, 0.1, 0.2, 0.5];
    let mut fractions = vec![Vec::with_capacity(reps); grid.len()];
    for rep in 0..reps {
        let mut rng = substream(1702, rep as u64);
        let t_obs: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
        let t_null: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..k).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let p = mc_pooled_pvalues(&t_obs, &t_null).unwrap();
        for (gi, &t) in grid.iter().enumerate() {
            let frac = p.values().iter().filter(|&&v| v <= t).count() as f64 / m as f64;
            fractions[gi].push(frac);
        }
    }
    for (gi, &t) in grid.iter().enumerate() {
        let (mean, se) = mean_se(&fractions[gi]);
        assert!(mean <= t + 3.0 * se, "t={t}: mean {mean}, se {se}");
    }
}

#[test]
fn gaussian_means_lemma_identity_monte_carlo() {
    // E[1 - F_Beta(1/2, (n-1)/2 - 1/2... with n = 5: Beta(1/2, 3/2)] of 1/X
    // for X ~ chi-square with 4 degrees of freedom equals 2*Phi-bar(1).
    // Chi-square_4 = -2 ln(U1 U2).
    let mut rng = substream(555, 0);
    let draws = 200_000usize;
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen::<f64>().max(1e-300);
        let x = -2.0 * (u1.ln() + u2.ln());
        let arg = (1.0 / x).min(1.0);
        values.push(1.0 - reg_inc_beta(arg, 0.5, 1.5).unwrap().get());
    }
    let (mean, se) = mean_se(&values);
    let target = 2.0 * normal_sf(1.0).unwrap().get();
    assert!(
        (mean - target).abs() <= 3.0 * se,
        "mean {mean}, target {target}, se {se}"
    );
}

#[test]
fn gaussian_means_approximately_valid_under_global_null() {
    // Heterogeneous variances, zero means: the averaged CDF may exceed t by
    // at most 1/m.
    let (m, n, reps) = (50usize, 5usize, 200usize);
    let grid = [0.05, 0.1, 0.2, 0.5];
    let mut fractions = vec![Vec::with_capacity(reps); grid.len()];
    for rep in 0..reps {
        let mut rng = substream(8088, rep as u64);
        let summaries: Vec<GaussianSummary> = (0..m)
            .map(|_| {
                let sigma = 0.5 * (4.0f64).powf(rng.gen::<f64>());
                let normal = Normal::new(0.0, sigma).unwrap();
                let sample: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                let ybar = sample.iter().sum::<f64>() / n as f64;
                let s2 =
                    sample.iter().map(|y| (y - ybar) * (y - ybar)).sum::<f64>() / (n as f64 - 1.0);
                GaussianSummary::new(ybar, s2, n).unwrap()
            })
            .collect();
        let p = gaussian_means_pvalues(&summaries).unwrap();
        for (gi, &t) in grid.iter().enumerate() {
            let frac = p.values().iter().filter(|&&v| v <= t).count() as f64 / m as f64;
            fractions[gi].push(frac);
        }
    }
    let slack = 1.0 / m as f64;
    for (gi, &t) in grid.iter().enumerate() {
        let (mean, se) = mean_se(&fractions[gi]);
        assert!(
            mean <= t + slack + 3.0 * se,
            "t={t}: mean {mean}, se {se} violates (0, 1/m)-approximate validity"
        );
    }
}
