//! The decreasing-density weight recursion against an independent linear
//! program over piecewise-linear envelopes.

use compound_bh::constructions::{decreasing_density_pvalues, decreasing_density_weights};
use rand::Rng;
use test_oracles::decreasing_envelope_lp;

fn check_instance(x: &[f64]) {
    let weights = decreasing_density_weights(x).unwrap();
    let p = decreasing_density_pvalues(x).unwrap();
    let lp = decreasing_envelope_lp(x, weights.delta);
    for (i, (&got, &want)) in p.values().iter().zip(&lp).enumerate() {
        let want = want.min(1.0);
        assert!(
            (got - want).abs() <= 1e-9,
            "x={x:?} index {i}: recursion {got}, LP {want}"
        );
    }
}

#[test]
fn matches_lp_on_random_instances() {
    let mut rng = compound_bh::rng::substream(77, 0);
    for case in 0..100 {
        let m = rng.gen_range(1..=6);
        let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0f64)).collect();
        // Mix in ties and zeros now and then.
        if m >= 2 && case % 7 == 0 {
            x[1] = x[0];
        }
        if case % 11 == 0 {
            x[0] = 0.0;
        }
        check_instance(&x);
    }
}

#[test]
fn matches_lp_on_structured_instances() {
    check_instance(&[1.0, 2.0, 3.0, 4.0]);
    check_instance(&[0.0, 0.0, 5.0, 5.0]);
    check_instance(&[2.7]);
    check_instance(&[1.0, 1.0, 1.0]);
    check_instance(&[0.001, 8.5, 8.6, 8.7, 9.9, 0.002]);
}

#[test]
fn tail_sums_match_lp_at_every_order_statistic() {
    // Exhaustive over positions, not just the returned p-values: the LP
    // value at X_(i) must equal the weight tail sum there.
    let x = [0.4, 1.3, 2.2, 5.0, 5.5];
    let weights = decreasing_density_weights(&x).unwrap();
    let lp = decreasing_envelope_lp(&x, weights.delta);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    for (pos, &idx) in order.iter().enumerate() {
        let tail: f64 = weights.w[pos + 1..].iter().sum();
        assert!((lp[idx] - tail.min(1.0)).abs() <= 1e-9);
    }
}

#[test]
fn large_profile_shape_check() {
    // 9000 near-origin draws and 1000 far-right draws: the far group must
    // receive small p-values and the sorted curve must sit below the
    // diagonal on the left.
    use rand_distr::{Distribution, Normal};
    let mut rng = compound_bh::rng::substream(4242, 0);
    let null_dist = Normal::new(0.0f64, 1.0).unwrap();
    let alt_dist = Normal::new(10.0f64, 2.0).unwrap();
    let m = 10_000;
    let mut x: Vec<f64> = Vec::with_capacity(m);
    for _ in 0..9_000 {
        let v: f64 = null_dist.sample(&mut rng);
        x.push(v.abs());
    }
    for _ in 0..1_000 {
        let v: f64 = alt_dist.sample(&mut rng);
        x.push(v.abs());
    }
    let p = decreasing_density_pvalues(&x).unwrap();
    let alt_small = p.values()[9_000..].iter().filter(|&&v| v <= 0.05).count();
    assert!(
        alt_small >= 900,
        "only {alt_small} of 1000 non-nulls below 0.05"
    );
    // Every p-value carries the floor Δ ≈ 0.0019, so the sorted curve can
    // only dip under the diagonal once i/m clears it; check the region
    // between the floor and the non-null fraction.
    let mut sorted = p.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let below = (250..1_000)
        .filter(|&i| sorted[i] < (i + 1) as f64 / m as f64)
        .count();
    assert!(
        below >= 740,
        "sorted curve not below the diagonal: {below}/750"
    );
}
