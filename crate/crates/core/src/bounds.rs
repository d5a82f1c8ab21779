//! Deterministic numerical verification of the machinery behind the FDR
//! bounds: the c_ℓ recursion whose limit gives the 1.93 constant, the Poisson
//! series identities, the Poisson difference argmax, and the closed-form
//! global-null bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{poisson_tail, KahanSum, Probability};

/// The recursion c_1 = 1, c_2 = 1.5,
/// c_ℓ = c_{ℓ−1} + P(Pois((ℓ−1)/c_{ℓ−1}) ≥ ℓ−1) − c_{ℓ−1}·P(Pois((ℓ−1)/c_{ℓ−1}) ≥ ℓ),
/// whose limit bounds the worst-case FDR inflation for independent compound
/// p-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CSequence {
    /// c_1 … c_L.
    pub values: Vec<f64>,
    /// First index ℓ (1-based) where the increment dropped below `tolerance`.
    pub converged_at: Option<usize>,
    pub tolerance: f64,
}

impl CSequence {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("L >= 2")
    }
}

/// Evaluate the c_ℓ recursion out to length `len`, recording where successive
/// increments first fall below `tol`.
pub fn c_sequence(len: usize, tol: f64) -> Result<CSequence> {
    if len < 2 {
        return Err(Error::domain("c_sequence: L must be at least 2"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain("c_sequence: tolerance must be positive"));
    }
    let mut values = Vec::with_capacity(len);
    values.push(1.0);
    values.push(1.5);
    let mut converged_at = None;
    for l in 3..=len {
        let prev = values[l - 2];
        let lambda = (l - 1) as f64 / prev;
        let tail_ge_lm1 = poisson_tail(lambda, (l - 1) as u64)?.get();
        let tail_ge_l = poisson_tail(lambda, l as u64)?.get();
        let next = prev + tail_ge_lm1 - prev * tail_ge_l;
        values.push(next);
        if converged_at.is_none() && (next - prev).abs() < tol {
            converged_at = Some(l);
        }
    }
    Ok(CSequence {
        values,
        converged_at,
        tolerance: tol,
    })
}

/// Which Poisson series identity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailMode {
    /// Σ_k P(Pois(tk) ≥ k) = (t − t²/2)/(1−t)².
    Geq,
    /// Σ_k P(Pois(tk) > k) = (t²/2)/(1−t)².
    Gt,
}

/// A truncated Poisson series next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonIdentity {
    pub series: f64,
    pub closed: f64,
    /// Number of series terms actually summed.
    pub terms: usize,
    /// Analytic bound on the discarded tail.
    pub tail_bound: f64,
}

/// Sum Σ_{k=1..} P(Pois(tk) ≥ k) (or with strict inequality) against its
/// closed form. Truncation uses the Chernoff ratio ρ = t·e^{1−t} < 1: the
/// discarded tail is below ρ^{K+1}/(1−ρ), and summation stops once that bound
/// drops under 1e-10 (or at `k_max`).
pub fn poisson_identity(t: f64, mode: TailMode, k_max: usize) -> Result<PoissonIdentity> {
    if t.is_nan() || t <= 0.0 || t >= 1.0 {
        return Err(Error::domain(format!(
            "poisson_identity: t must lie in (0,1), got {t}"
        )));
    }
    if k_max < 1 {
        return Err(Error::domain("poisson_identity: k_max must be at least 1"));
    }
    let rho = t * (1.0 - t).exp();
    let mut acc = KahanSum::default();
    let mut rho_pow = rho;
    let mut terms = 0;
    let mut tail_bound = rho / (1.0 - rho);
    for k in 1..=k_max {
        let threshold = match mode {
            TailMode::Geq => k as u64,
            TailMode::Gt => k as u64 + 1,
        };
        acc.add(poisson_tail(t * k as f64, threshold)?.get());
        terms = k;
        rho_pow *= rho;
        tail_bound = rho_pow / (1.0 - rho);
        if tail_bound < 1e-10 {
            break;
        }
    }
    let closed = match mode {
        TailMode::Geq => (t - t * t / 2.0) / ((1.0 - t) * (1.0 - t)),
        TailMode::Gt => (t * t / 2.0) / ((1.0 - t) * (1.0 - t)),
    };
    Ok(PoissonIdentity {
        series: acc.value(),
        closed,
        terms,
        tail_bound,
    })
}

/// Grid-search argmax of f(t) = P(Pois(t) ≥ i−1) − c·P(Pois(t) ≥ i) over
/// t ∈ (0, 4i/c]. The maximizer should sit at (i−1)/c.
pub fn poisson_argmax_check(i: usize, c: f64, grid: usize) -> Result<f64> {
    if i < 2 {
        return Err(Error::domain("poisson_argmax_check: i must be at least 2"));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::domain("poisson_argmax_check: c must be positive"));
    }
    if grid < 2 {
        return Err(Error::domain(
            "poisson_argmax_check: grid must be at least 2",
        ));
    }
    let hi = 4.0 * i as f64 / c;
    let mut best_t = hi / grid as f64;
    let mut best_f = f64::NEG_INFINITY;
    for g in 1..=grid {
        let t = hi * g as f64 / grid as f64;
        let f = poisson_tail(t, (i - 1) as u64)?.get() - c * poisson_tail(t, i as u64)?.get();
        if f > best_f {
            best_f = f;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Closed-form FDR bound under the global null: α + (α²/2)/(1−α)².
pub fn globalnull_closed_bound(alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "globalnull_closed_bound: alpha must lie in [0,1), got {alpha}"
        )));
    }
    Ok(alpha + 0.5 * alpha * alpha / ((1.0 - alpha) * (1.0 - alpha)))
}

/// Upper bound on B_i(t), the worst probability that a sum of independent
/// Bernoullis with total mean ≤ t reaches i: union bounds t and t²/2 for
/// i = 1, 2, and the binomial-to-Poisson comparison P(Pois(t) ≥ i) for
/// i ≥ 3 (valid in the regime t ≤ i−1).
pub fn hoeffding_poisson_bound(t: f64, i: usize) -> Result<Probability> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain(format!(
            "hoeffding_poisson_bound: t must be finite and nonnegative, got {t}"
        )));
    }
    match i {
        0 => Err(Error::domain(
            "hoeffding_poisson_bound: i must be at least 1",
        )),
        1 => Ok(Probability::new(t.min(1.0)).expect("in range")),
        2 => Ok(Probability::new((t * t / 2.0).min(1.0)).expect("in range")),
        _ => {
            if t > (i - 1) as f64 {
                return Err(Error::domain(format!(
                    "hoeffding_poisson_bound: the Poisson comparison needs t <= i-1, got t={t}, i={i}"
                )));
            }
            poisson_tail(t, i as u64)
        }
    }
}
