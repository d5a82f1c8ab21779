//! Seeded Monte Carlo estimation of FDR (and its modified variant) over atom
//! scenarios, plus the named verification suites for the theorem bounds.
//!
//! Replicate r always draws from substream (seed, r), and per-replicate
//! metric values are reduced in replicate order after collection, so results
//! are bit-identical whatever the worker count.

use serde::Serialize;

use crate::adversarial::{
    approx_validity_check, compound_validity_check, inflate_to_approx, prop2_scenario,
    prop4_scenario, prop5_scenario, random_atom_scenario, random_gamma_scenario,
    random_global_null_scenario, AtomScenario, Sampler,
};
use crate::bh::{bh_reject, fdp, harmonic, modified_fdp, ApproxParams, PValueVector};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// What to average over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Fdr,
    ModifiedFdr(ApproxParams),
    AnyRejection,
}

impl Metric {
    fn label(&self) -> String {
        match self {
            Metric::Fdr => "fdr".to_string(),
            Metric::ModifiedFdr(p) => format!("modified_fdr(eps={},delta={})", p.epsilon, p.delta),
            Metric::AnyRejection => "any_rejection".to_string(),
        }
    }
}

/// A single Monte Carlo experiment: level, replicate count, seed, and metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub reps: u64,
    pub seed: u64,
    pub metric: Metric,
}

impl ExperimentConfig {
    pub fn new(alpha: f64, reps: u64, seed: u64, metric: Metric) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!("alpha outside [0,1]: {alpha}")));
        }
        if reps == 0 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if let Metric::ModifiedFdr(params) = metric {
            if params.delta > 0.0 && alpha == 0.0 {
                return Err(Error::domain(
                    "modified FDR with delta > 0 requires alpha > 0",
                ));
            }
        }
        Ok(ExperimentConfig {
            alpha,
            reps,
            seed,
            metric,
        })
    }
}

/// Monte Carlo mean, standard error, and provenance of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdrEstimate {
    pub mean: f64,
    pub se: f64,
    pub reps: u64,
    pub seed: u64,
    /// Analytic value when the scenario carries one.
    pub exact: Option<f64>,
}

fn replicate_value(
    sampler: &Sampler<'_>,
    scenario: &AtomScenario,
    cfg: &ExperimentConfig,
    r: u64,
) -> f64 {
    let mut values = Vec::with_capacity(scenario.m());
    sampler.draw_into(cfg.seed, r, &mut values);
    let p = PValueVector::new(values).expect("atom values lie in [0,1]");
    let res = bh_reject(&p, cfg.alpha).expect("validated config");
    match cfg.metric {
        Metric::Fdr => fdp(&res.rejected, scenario.h0()),
        Metric::ModifiedFdr(params) => modified_fdp(
            &res.rejected,
            scenario.h0(),
            scenario.m(),
            cfg.alpha,
            params,
        )
        .expect("validated config"),
        Metric::AnyRejection => {
            if res.k_hat > 0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn summarize(values: &[f64], cfg: &ExperimentConfig, exact: Option<f64>) -> FdrEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    FdrEstimate {
        mean,
        se: (var / n).sqrt(),
        reps: cfg.reps,
        seed: cfg.seed,
        exact,
    }
}

/// Estimate the configured metric by Monte Carlo, parallelizing across
/// replicates when the `parallel` feature is active.
pub fn estimate_fdr(scenario: &AtomScenario, cfg: &ExperimentConfig) -> FdrEstimate {
    let sampler = Sampler::new(scenario);
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| replicate_value(&sampler, scenario, cfg, r))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = (0..cfg.reps)
        .map(|r| replicate_value(&sampler, scenario, cfg, r))
        .collect();
    summarize(&values, cfg, scenario.exact_fdr())
}

/// Single-threaded estimator; always available and bit-identical to
/// `estimate_fdr` for the same configuration.
pub fn estimate_fdr_sequential(scenario: &AtomScenario, cfg: &ExperimentConfig) -> FdrEstimate {
    let sampler = Sampler::new(scenario);
    let values: Vec<f64> = (0..cfg.reps)
        .map(|r| replicate_value(&sampler, scenario, cfg, r))
        .collect();
    summarize(&values, cfg, scenario.exact_fdr())
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// The named verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    Thm1,
    Thm2,
    Thm3,
    Gamma,
    Props,
}

impl std::str::FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm1" => Ok(SuiteName::Thm1),
            "thm2" => Ok(SuiteName::Thm2),
            "thm3" => Ok(SuiteName::Thm3),
            "gamma" => Ok(SuiteName::Gamma),
            "props" => Ok(SuiteName::Props),
            other => Err(Error::domain(format!(
                "unknown suite '{other}' (expected thm1|thm2|thm3|gamma|props)"
            ))),
        }
    }
}

/// Suite-level knobs: replicate count (default depends on the suite) and the
/// master seed from which all scenario seeds derive.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteParams {
    pub reps: Option<u64>,
    pub seed: u64,
}

/// How an entry's reference value constrains the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    /// Pass when mean ≤ reference + 3·se.
    UpperBound,
    /// Pass when |mean − reference| ≤ 3·se.
    Exact,
    /// Pass when mean ≥ reference − 3·se.
    LowerBound,
}

/// One scenario's verdict within a suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub scenario: String,
    pub alpha: f64,
    pub metric: String,
    pub estimate: FdrEstimate,
    pub reference: f64,
    pub kind: RefKind,
    pub pass: bool,
}

/// A full suite run; serializes to the JSON and CSV report formats.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
    pub all_pass: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Flat CSV: one row per entry.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("suite,scenario,alpha,metric,estimate,se,reps,seed,reference,kind,pass\n");
        for e in &self.entries {
            let kind = match e.kind {
                RefKind::UpperBound => "upper_bound",
                RefKind::Exact => "exact",
                RefKind::LowerBound => "lower_bound",
            };
            out.push_str(&format!(
                "{:?},{},{},{},{},{},{},{},{},{},{}\n",
                self.suite,
                e.scenario,
                e.alpha,
                e.metric,
                e.estimate.mean,
                e.estimate.se,
                e.estimate.reps,
                e.estimate.seed,
                e.reference,
                kind,
                e.pass
            ));
        }
        out
    }
}

fn judge(kind: RefKind, est: &FdrEstimate, reference: f64) -> bool {
    let slack = 3.0 * est.se;
    match kind {
        RefKind::UpperBound => est.mean <= reference + slack,
        RefKind::Exact => (est.mean - reference).abs() <= slack,
        RefKind::LowerBound => est.mean >= reference - slack,
    }
}

struct SuiteBuilder {
    suite: SuiteName,
    seed: u64,
    reps: u64,
    entries: Vec<SuiteEntry>,
    next_seed_index: u64,
}

impl SuiteBuilder {
    fn new(suite: SuiteName, seed: u64, reps: u64) -> Self {
        SuiteBuilder {
            suite,
            seed,
            reps,
            entries: Vec::new(),
            next_seed_index: 0,
        }
    }

    fn next_seed(&mut self) -> u64 {
        let s = derive_seed(self.seed, self.next_seed_index);
        self.next_seed_index += 1;
        s
    }

    fn run(
        &mut self,
        name: impl Into<String>,
        scenario: &AtomScenario,
        alpha: f64,
        metric: Metric,
        reference: f64,
        kind: RefKind,
    ) -> Result<()> {
        let seed = self.next_seed();
        let cfg = ExperimentConfig::new(alpha, self.reps, seed, metric)?;
        let estimate = estimate_fdr(scenario, &cfg);
        let pass = judge(kind, &estimate, reference);
        self.entries.push(SuiteEntry {
            scenario: name.into(),
            alpha,
            metric: metric.label(),
            estimate,
            reference,
            kind,
            pass,
        });
        Ok(())
    }

    fn finish(self) -> SuiteReport {
        let all_pass = self.entries.iter().all(|e| e.pass);
        SuiteReport {
            suite: self.suite,
            seed: self.seed,
            entries: self.entries,
            all_pass,
        }
    }
}

const FDR_CONSTANT: f64 = 1.93;

/// Run one named suite and report per-scenario verdicts.
///
/// - `thm1`: 100 random compound-valid scenarios plus the two named
///   worst cases, each checked against FDR ≤ 1.93·α.
/// - `thm2`: (ε, δ)-inflated scenarios (analytically re-validated) checked
///   against the modified-FDR bound 1.93·α·(1+ε).
/// - `thm3`: global-null batteries checked against α + 2α².
/// - `gamma`: batteries whose null marginals satisfy P(p ≤ α) ≤ γ, checked
///   against α/(1−γ).
/// - `props`: the three named scenarios against their analytic FDR values,
///   plus the harmonic lower bound.
pub fn run_suite(suite: SuiteName, params: &SuiteParams) -> Result<SuiteReport> {
    match suite {
        SuiteName::Thm1 => {
            let reps = params.reps.unwrap_or(20_000);
            let mut b = SuiteBuilder::new(suite, params.seed, reps);
            let alpha = 0.1;
            let bound = FDR_CONSTANT * alpha;
            for i in 0..100 {
                let scenario = random_atom_scenario(50, derive_seed(params.seed, 1_000 + i), 12);
                debug_assert!(compound_validity_check(&scenario) <= 0.0);
                b.run(
                    format!("fuzz-{i:03}"),
                    &scenario,
                    alpha,
                    Metric::Fdr,
                    bound,
                    RefKind::UpperBound,
                )?;
            }
            let prop2 = prop2_scenario(alpha, 30)?;
            b.run(
                "prop2(0.1,30)",
                &prop2,
                alpha,
                Metric::Fdr,
                bound,
                RefKind::UpperBound,
            )?;
            let prop4 = prop4_scenario(alpha, 50)?;
            b.run(
                "prop4(0.1,50)",
                &prop4,
                alpha,
                Metric::Fdr,
                bound,
                RefKind::UpperBound,
            )?;
            Ok(b.finish())
        }
        SuiteName::Thm2 => {
            let reps = params.reps.unwrap_or(20_000);
            let mut b = SuiteBuilder::new(suite, params.seed, reps);
            let alpha = 0.1;
            let (eps, delta) = (0.25, 0.01);
            let approx = ApproxParams::new(eps, delta)?;
            let bound = FDR_CONSTANT * alpha * (1.0 + eps);
            for i in 0..20 {
                let base = random_atom_scenario(50, derive_seed(params.seed, 2_000 + i), 12);
                let scenario = inflate_to_approx(&base, eps, delta)?;
                let slack = approx_validity_check(&scenario, eps, delta);
                if slack > 1e-12 {
                    return Err(Error::domain(format!(
                        "inflated scenario {i} fails the (eps,delta) check: slack {slack}"
                    )));
                }
                b.run(
                    format!("approx-fuzz-{i:03}"),
                    &scenario,
                    alpha,
                    Metric::ModifiedFdr(approx),
                    bound,
                    RefKind::UpperBound,
                )?;
            }
            let base = prop4_scenario(alpha, 50)?;
            let scenario = inflate_to_approx(&base, eps, delta)?;
            b.run(
                "approx-prop4(0.1,50)",
                &scenario,
                alpha,
                Metric::ModifiedFdr(approx),
                bound,
                RefKind::UpperBound,
            )?;
            Ok(b.finish())
        }
        SuiteName::Thm3 => {
            let reps = params.reps.unwrap_or(20_000);
            let mut b = SuiteBuilder::new(suite, params.seed, reps);
            for (gi, &alpha) in [0.1, 0.2, 0.3].iter().enumerate() {
                let bound = alpha + 2.0 * alpha * alpha;
                let prop4 = prop4_scenario(alpha, 20)?;
                b.run(
                    format!("prop4({alpha},20)"),
                    &prop4,
                    alpha,
                    Metric::Fdr,
                    bound,
                    RefKind::UpperBound,
                )?;
                for i in 0..15 {
                    let scenario = random_global_null_scenario(
                        50,
                        derive_seed(params.seed, 3_000 + (gi as u64) * 100 + i),
                        12,
                    );
                    b.run(
                        format!("globalnull-fuzz-a{alpha}-{i:02}"),
                        &scenario,
                        alpha,
                        Metric::Fdr,
                        bound,
                        RefKind::UpperBound,
                    )?;
                }
            }
            Ok(b.finish())
        }
        SuiteName::Gamma => {
            let reps = params.reps.unwrap_or(20_000);
            let mut b = SuiteBuilder::new(suite, params.seed, reps);
            for (gi, &gamma) in [0.2, 0.5].iter().enumerate() {
                for (ai, &alpha) in [0.1, 0.2].iter().enumerate() {
                    let bound = alpha / (1.0 - gamma);
                    for i in 0..10 {
                        let scenario = random_gamma_scenario(
                            50,
                            derive_seed(
                                params.seed,
                                4_000 + (gi as u64) * 400 + (ai as u64) * 20 + i,
                            ),
                            12,
                            alpha,
                            gamma,
                        );
                        b.run(
                            format!("gamma-fuzz-g{gamma}-a{alpha}-{i:02}"),
                            &scenario,
                            alpha,
                            Metric::Fdr,
                            bound,
                            RefKind::UpperBound,
                        )?;
                    }
                }
            }
            Ok(b.finish())
        }
        SuiteName::Props => {
            let reps = params.reps.unwrap_or(200_000);
            let mut b = SuiteBuilder::new(suite, params.seed, reps);
            let prop2 = prop2_scenario(0.1, 30)?;
            b.run(
                "prop2(0.1,30)",
                &prop2,
                0.1,
                Metric::Fdr,
                prop2.exact_fdr().expect("analytic value"),
                RefKind::Exact,
            )?;
            let prop4 = prop4_scenario(0.2, 10)?;
            b.run(
                "prop4(0.2,10)",
                &prop4,
                0.2,
                Metric::Fdr,
                prop4.exact_fdr().expect("analytic value"),
                RefKind::Exact,
            )?;
            let prop5 = prop5_scenario(0.25, 3)?;
            b.run(
                "prop5(0.25,3)",
                &prop5,
                0.25,
                Metric::Fdr,
                prop5.exact_fdr().expect("analytic value"),
                RefKind::Exact,
            )?;
            let lower = 3.0 / 8.0 * (0.25 * harmonic(3)?).min(1.0);
            b.run(
                "prop5(0.25,3)-lower",
                &prop5,
                0.25,
                Metric::Fdr,
                lower,
                RefKind::LowerBound,
            )?;
            Ok(b.finish())
        }
    }
}
