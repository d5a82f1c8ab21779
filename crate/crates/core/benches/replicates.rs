//! Replicate-loop throughput: rayon fan-out against the sequential path, at
//! a couple of pool sizes, plus the permutation-pooling inner loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use compound_bh::constructions::{permutation_pooled_pvalues, Trial};
use compound_bh::sim::{estimate_fdr, estimate_fdr_sequential, ExperimentConfig, Metric};

fn bench_estimate_fdr(c: &mut Criterion) {
    let scenario = compound_bh::adversarial::prop2_scenario(0.1, 30).unwrap();
    let cfg = ExperimentConfig::new(0.1, 20_000, 7, Metric::Fdr).unwrap();
    let mut group = c.benchmark_group("estimate_fdr_20k_reps");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| estimate_fdr_sequential(&scenario, &cfg))
    });
    for threads in [2usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", threads), &threads, |b, _| {
            b.iter(|| pool.install(|| estimate_fdr(&scenario, &cfg)))
        });
    }
    group.finish();
}

fn bench_permutation_pooling(c: &mut Criterion) {
    fn diff_of_means(t: &Trial<f64>) -> f64 {
        let treated: f64 = t.treated().iter().sum::<f64>() / t.n_treated() as f64;
        let control: f64 = t.control().iter().sum::<f64>() / (t.n() - t.n_treated()) as f64;
        treated - control
    }
    let trials: Vec<Trial<f64>> = (0..200)
        .map(|i| {
            let units: Vec<f64> = (0..8).map(|u| ((i * 17 + u * 5) % 23) as f64).collect();
            Trial::new(units, 4).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("permutation_pooling_200x8");
    group.sample_size(20);
    group.bench_function("default", |b| {
        b.iter(|| permutation_pooled_pvalues(&trials, diff_of_means, 20_000, 3).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_estimate_fdr, bench_permutation_pooling);
criterion_main!(benches);
