//! Exact worst-case distributions over p-value vectors, a randomized
//! compound-valid scenario generator for fuzzing, and an analytic validity
//! checker.
//!
//! Scenarios are discrete: each coordinate is a list of atoms with residual
//! mass at 1. Atom values are always computed with the same `α·k/m` expression
//! the step-up procedure uses for its thresholds, so ties at a threshold
//! compare equal in floating point and per-draw behavior matches the intended
//! case analysis exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bh::{bh_threshold, harmonic, NullMask, PValueVector};
use crate::error::{Error, Result};
use crate::rng::substream;

/// A point mass inside a coordinate's distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

/// One coordinate's marginal: atoms plus implicit residual mass at 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Coordinate {
    pub atoms: Vec<Atom>,
}

impl Coordinate {
    fn deterministic_one() -> Self {
        Coordinate { atoms: Vec::new() }
    }

    fn point(value: f64) -> Self {
        Coordinate {
            atoms: vec![Atom { value, mass: 1.0 }],
        }
    }

    fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// CDF at `t`, counting the residual only at t = 1.
    fn cdf(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        self.atoms
            .iter()
            .filter(|a| a.value <= t)
            .map(|a| a.mass)
            .sum()
    }
}

/// A bin of coordinates that all fire together on one shared uniform draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// 0-based coordinate indices.
    pub coords: Vec<usize>,
    pub value: f64,
    pub prob: f64,
}

/// How coordinates are coupled when sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Coupling {
    Independent,
    SharedBins { bins: Vec<Bin> },
}

/// A fully analytic distribution over p-value vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomScenario {
    m: usize,
    h0: NullMask,
    coordinates: Vec<Coordinate>,
    coupling: Coupling,
    exact_fdr: Option<f64>,
}

impl AtomScenario {
    /// Independent-coordinates scenario. Atom lists are sorted by value and
    /// validated: values in [0, 1], masses nonnegative with total ≤ 1.
    pub fn independent(
        m: usize,
        h0: NullMask,
        mut coordinates: Vec<Coordinate>,
        exact_fdr: Option<f64>,
    ) -> Result<Self> {
        if coordinates.len() != m {
            return Err(Error::length(format!(
                "{} coordinates for m={m}",
                coordinates.len()
            )));
        }
        if h0.m() != m {
            return Err(Error::length(format!(
                "null mask sized {} for m={m}",
                h0.m()
            )));
        }
        for (i, c) in coordinates.iter_mut().enumerate() {
            c.atoms
                .sort_unstable_by(|a, b| a.value.partial_cmp(&b.value).expect("finite"));
            for a in &c.atoms {
                if !(0.0..=1.0).contains(&a.value) || !(0.0..=1.0).contains(&a.mass) {
                    return Err(Error::domain(format!(
                        "coordinate {i}: atom ({}, {}) outside [0,1]",
                        a.value, a.mass
                    )));
                }
            }
            if c.total_mass() > 1.0 + 1e-12 {
                return Err(Error::domain(format!(
                    "coordinate {i}: atom masses exceed 1"
                )));
            }
        }
        Ok(AtomScenario {
            m,
            h0,
            coordinates,
            coupling: Coupling::Independent,
            exact_fdr,
        })
    }

    /// Shared-bin scenario: coordinates inside a bin take the bin value when
    /// its uniform fires, everything else is deterministically 1.
    pub fn shared_bins(
        m: usize,
        h0: NullMask,
        bins: Vec<Bin>,
        exact_fdr: Option<f64>,
    ) -> Result<Self> {
        let mut coordinates = vec![Coordinate::deterministic_one(); m];
        let mut seen = vec![false; m];
        for (b, bin) in bins.iter().enumerate() {
            if !(0.0..=1.0).contains(&bin.prob) || !(0.0..=1.0).contains(&bin.value) {
                return Err(Error::domain(format!("bin {b}: value/prob outside [0,1]")));
            }
            for &c in &bin.coords {
                if c >= m {
                    return Err(Error::domain(format!(
                        "bin {b}: coordinate {c} out of range"
                    )));
                }
                if seen[c] {
                    return Err(Error::domain(format!("coordinate {c} in two bins")));
                }
                seen[c] = true;
                if bin.prob > 0.0 {
                    coordinates[c] = Coordinate {
                        atoms: vec![Atom {
                            value: bin.value,
                            mass: bin.prob,
                        }],
                    };
                }
            }
        }
        let mut scenario = AtomScenario::independent(m, h0, coordinates, exact_fdr)?;
        scenario.coupling = Coupling::SharedBins { bins };
        Ok(scenario)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h0(&self) -> &NullMask {
        &self.h0
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coordinates
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn exact_fdr(&self) -> Option<f64> {
        self.exact_fdr
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioWire::from(self)).expect("serializable")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let wire: ScenarioWire =
            serde_json::from_str(json).map_err(|e| Error::domain(format!("scenario JSON: {e}")))?;
        wire.try_into()
    }
}

/// Serialized form; `h0` uses 1-based indices.
#[derive(Serialize, Deserialize)]
struct ScenarioWire {
    m: usize,
    h0: Vec<usize>,
    coordinates: Vec<Coordinate>,
    coupling: Coupling,
    exact_fdr: Option<f64>,
}

impl From<&AtomScenario> for ScenarioWire {
    fn from(s: &AtomScenario) -> Self {
        ScenarioWire {
            m: s.m,
            h0: s.h0.members().map(|i| i + 1).collect(),
            coordinates: s.coordinates.clone(),
            coupling: s.coupling.clone(),
            exact_fdr: s.exact_fdr,
        }
    }
}

impl TryFrom<ScenarioWire> for AtomScenario {
    type Error = Error;

    fn try_from(w: ScenarioWire) -> Result<Self> {
        if w.h0.contains(&0) {
            return Err(Error::domain("scenario JSON h0 indices are 1-based"));
        }
        let h0 = NullMask::new(w.m, w.h0.iter().map(|&i| i - 1))?;
        let mut scenario = AtomScenario::independent(w.m, h0, w.coordinates, w.exact_fdr)?;
        if let Coupling::SharedBins { bins } = w.coupling {
            scenario =
                AtomScenario::shared_bins(scenario.m, scenario.h0, bins, scenario.exact_fdr)?;
        }
        Ok(scenario)
    }
}

/// One sampled p-vector together with the scenario's null set.
#[derive(Debug, Clone)]
pub struct SampleDraw {
    pub p: PValueVector,
    pub h0: NullMask,
}

// ---------------------------------------------------------------------------
// Named constructions
// ---------------------------------------------------------------------------

/// Worst-case independent compound p-values with FDR = (7/6)·α.
///
/// Requires 1/(2α) to be an integer k and m ≥ 3k. One null coordinate
/// randomizes between the k̂ = 3k and k̂ = 2k branches; everything else is
/// deterministic.
pub fn prop2_scenario(alpha: f64, m: usize) -> Result<AtomScenario> {
    if alpha.is_nan() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::domain(format!(
            "alpha must be in (0,1], got {alpha}"
        )));
    }
    let k_real = 1.0 / (2.0 * alpha);
    let k = k_real.round();
    if (k_real - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::domain(format!(
            "1/(2*alpha) must be a positive integer, got {k_real}"
        )));
    }
    let k = k as usize;
    if m < 3 * k {
        return Err(Error::domain(format!(
            "m must be at least 3/(2*alpha) = {}, got {m}",
            3 * k
        )));
    }
    let v_three_k = bh_threshold(alpha, 3 * k, m); // equals 1.5/m
    let v_two_k = bh_threshold(alpha, 2 * k, m); // equals 1/m
    let n_null = m - 3 * k + 2;
    let mut coords = Vec::with_capacity(m);
    coords.push(Coordinate {
        atoms: vec![Atom {
            value: v_three_k,
            mass: 0.5,
        }],
    });
    coords.push(Coordinate::point(v_two_k));
    coords.extend((2..n_null).map(|_| Coordinate::deterministic_one()));
    coords.extend((0..2 * k - 1).map(|_| Coordinate::point(v_two_k)));
    coords.extend((0..k - 1).map(|_| Coordinate::point(v_three_k)));
    let h0 = NullMask::new(m, 0..n_null)?;
    AtomScenario::independent(m, h0, coords, Some(7.0 / 6.0 * alpha))
}

/// Worst-case independent compound p-values under the global null, with
/// FDR = α + α²/4. Requires α ∈ [0, 2/3] and m ≥ 2.
pub fn prop4_scenario(alpha: f64, m: usize) -> Result<AtomScenario> {
    if !(0.0..=2.0 / 3.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must be in [0, 2/3], got {alpha}"
        )));
    }
    if m < 2 {
        return Err(Error::domain(format!("m must be at least 2, got {m}")));
    }
    let v1 = bh_threshold(alpha, 1, m);
    let v2 = bh_threshold(alpha, 2, m);
    let mut coords = Vec::with_capacity(m);
    let atoms1 = if alpha > 0.0 {
        vec![
            Atom {
                value: v1,
                mass: alpha,
            },
            Atom {
                value: v2,
                mass: alpha / 2.0,
            },
        ]
    } else {
        Vec::new()
    };
    let atoms2 = if alpha > 0.0 {
        vec![Atom {
            value: v2,
            mass: alpha / 2.0,
        }]
    } else {
        Vec::new()
    };
    coords.push(Coordinate { atoms: atoms1 });
    coords.push(Coordinate { atoms: atoms2 });
    coords.extend((2..m).map(|_| Coordinate::deterministic_one()));
    AtomScenario::independent(
        m,
        NullMask::full(m),
        coords,
        Some(alpha + alpha * alpha / 4.0),
    )
}

/// PRDS compound p-values under the global null with FDR on the order of
/// α·h_m: bins of growing size fire on shared uniforms.
///
/// The exact FDR 1 − Π_ℓ (1 − α'/ℓ) is recorded for α < 1; at α = 1 only the
/// Monte Carlo estimate is reported.
pub fn prop5_scenario(alpha: f64, m: usize) -> Result<AtomScenario> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must be in [0,1], got {alpha}"
        )));
    }
    if m < 1 {
        return Err(Error::domain("m must be at least 1"));
    }
    let mut l_max = 1usize;
    while (l_max + 1) * (l_max + 2) / 2 <= m {
        l_max += 1;
    }
    let alpha_prime = alpha.min(1.0 / harmonic(m)?);
    let mut bins = Vec::with_capacity(l_max);
    let mut next = 0usize;
    for l in 1..=l_max {
        bins.push(Bin {
            coords: (next..next + l).collect(),
            value: bh_threshold(alpha, l, m),
            prob: alpha_prime / l as f64,
        });
        next += l;
    }
    let exact = if alpha < 1.0 {
        let mut surv = 1.0;
        for l in 1..=l_max {
            surv *= 1.0 - alpha_prime / l as f64;
        }
        Some(1.0 - surv)
    } else {
        None
    };
    AtomScenario::shared_bins(m, NullMask::full(m), bins, exact)
}

/// Independent p-values exactly uniform on the BH threshold grid, all null.
///
/// Requires m/α to be an integer so the grid tiles [0, 1] evenly; the BH
/// procedure then behaves exactly as it would on continuous uniforms and its
/// FDR equals α·|H0|/m = α.
pub fn discrete_uniform_scenario(alpha: f64, m: usize) -> Result<AtomScenario> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::domain(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let grid = m as f64 / alpha;
    let rounds = grid.round();
    if (grid - rounds).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "m/alpha must be an integer to tile [0,1], got {grid}"
        )));
    }
    let n_atoms = rounds as usize;
    let mass = 1.0 / n_atoms as f64;
    let atoms: Vec<Atom> = (1..n_atoms)
        .map(|k| Atom {
            value: bh_threshold(alpha, k, m),
            mass,
        })
        .collect();
    let coords = vec![Coordinate { atoms }; m];
    AtomScenario::independent(m, NullMask::full(m), coords, Some(alpha))
}

// ---------------------------------------------------------------------------
// Randomized generators
// ---------------------------------------------------------------------------

struct RandomScenarioSpec {
    m: usize,
    seed: u64,
    max_atoms: usize,
    global_null: bool,
    /// Per-null-coordinate cap on mass at values ≤ `gamma_at`, when present.
    gamma_cap: Option<(f64, f64)>,
}

fn random_scenario_impl(spec: RandomScenarioSpec) -> AtomScenario {
    let RandomScenarioSpec {
        m,
        seed,
        max_atoms,
        global_null,
        gamma_cap,
    } = spec;
    assert!(m >= 1 && max_atoms >= 1);
    let mut rng = substream(seed, 0);

    let n_null = if global_null {
        m
    } else {
        rng.gen_range(m.div_ceil(2)..=m)
    };
    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let null_idx: Vec<usize> = order[..n_null].to_vec();
    let h0 = NullMask::new(m, null_idx.iter().copied()).expect("indices in range");

    let r = rng.gen_range(1..=max_atoms);
    let mut locations: Vec<f64> = (0..r).map(|_| rng.gen::<f64>() * 0.9).collect();
    locations.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    locations.dedup();

    let mut coords = vec![Coordinate::default(); m];
    // Null mass budget: the running total of null CDFs at each atom location
    // stays strictly below m·t, with the increment spread over random
    // coordinates subject to each one's remaining capacity.
    let mut assigned = vec![0.0f64; m];
    let mut below_gamma = vec![0.0f64; m];
    let mut total = 0.0f64;
    for &t in &locations {
        if t <= 0.0 {
            continue;
        }
        let upper = (m as f64 * t).min(n_null as f64);
        let gap = upper - total;
        if gap <= 1e-6 {
            continue;
        }
        let delta = gap * rng.gen::<f64>() * 0.99;
        let weights: Vec<f64> = null_idx.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
        let wsum: f64 = weights.iter().sum();
        for (&c, &w) in null_idx.iter().zip(&weights) {
            let mut cap = 1.0 - assigned[c];
            if let Some((gamma_at, gamma)) = gamma_cap {
                if t <= gamma_at {
                    cap = cap.min(gamma - below_gamma[c]);
                }
            }
            let amount = (delta * w / wsum).min(cap).max(0.0);
            if amount > 0.0 {
                coords[c].atoms.push(Atom {
                    value: t,
                    mass: amount,
                });
                assigned[c] += amount;
                if let Some((gamma_at, _)) = gamma_cap {
                    if t <= gamma_at {
                        below_gamma[c] += amount;
                    }
                }
                total += amount;
            }
        }
    }
    // Non-nulls carry one unconstrained small-value atom each.
    for &c in &order[n_null..] {
        let value = rng.gen::<f64>() * 0.5;
        let mass = 0.5 + rng.gen::<f64>() * 0.5;
        coords[c] = Coordinate {
            atoms: vec![Atom { value, mass }],
        };
    }
    AtomScenario::independent(m, h0, coords, None).expect("constructed within bounds")
}

/// A random independent scenario that is compound-valid by construction:
/// the cumulative null mass at every atom location stays below m·t.
pub fn random_atom_scenario(m: usize, seed: u64, max_atoms: usize) -> AtomScenario {
    random_scenario_impl(RandomScenarioSpec {
        m,
        seed,
        max_atoms,
        global_null: false,
        gamma_cap: None,
    })
}

/// As `random_atom_scenario`, but with every hypothesis null.
pub fn random_global_null_scenario(m: usize, seed: u64, max_atoms: usize) -> AtomScenario {
    random_scenario_impl(RandomScenarioSpec {
        m,
        seed,
        max_atoms,
        global_null: true,
        gamma_cap: None,
    })
}

/// As `random_atom_scenario`, with the additional marginal constraint
/// P(p_j ≤ alpha) ≤ gamma for every null coordinate.
pub fn random_gamma_scenario(
    m: usize,
    seed: u64,
    max_atoms: usize,
    alpha: f64,
    gamma: f64,
) -> AtomScenario {
    random_scenario_impl(RandomScenarioSpec {
        m,
        seed,
        max_atoms,
        global_null: false,
        gamma_cap: Some((alpha, gamma)),
    })
}

/// Inflate a compound-valid scenario into an (ε, δ)-approximate one: null
/// atom masses scale by (1+ε) (capped at total mass 1) and δ·m extra mass is
/// placed at a value near zero on null coordinates with spare capacity.
pub fn inflate_to_approx(base: &AtomScenario, epsilon: f64, delta: f64) -> Result<AtomScenario> {
    if epsilon.is_nan() || delta.is_nan() || epsilon < 0.0 || delta < 0.0 {
        return Err(Error::domain("epsilon and delta must be nonnegative"));
    }
    if !matches!(base.coupling, Coupling::Independent) {
        return Err(Error::domain("inflation requires an independent scenario"));
    }
    let mut coords = base.coordinates.clone();
    for i in base.h0.members() {
        let mut cum = 0.0;
        for atom in &mut coords[i].atoms {
            let scaled = atom.mass * (1.0 + epsilon);
            atom.mass = scaled.min(1.0 - cum);
            cum += atom.mass;
        }
    }
    let tiny = 1e-6;
    let mut remaining = delta * base.m as f64;
    for i in base.h0.members() {
        if remaining <= 0.0 {
            break;
        }
        let spare = 1.0 - coords[i].total_mass();
        let add = spare.min(remaining);
        if add > 0.0 {
            coords[i].atoms.insert(
                0,
                Atom {
                    value: tiny,
                    mass: add,
                },
            );
            remaining -= add;
        }
    }
    AtomScenario::independent(base.m, base.h0.clone(), coords, None)
}

// ---------------------------------------------------------------------------
// Validity checking and sampling
// ---------------------------------------------------------------------------

/// Worst slack of the (ε, δ)-relaxed compound validity condition:
/// max over atom locations t (and t = 1) of Σ_{i∈H0} F_i(t) − m(t(1+ε)+δ).
/// Nonpositive means valid. Checking only atom locations suffices: between
/// atoms the null CDF sum is constant while the right side increases.
pub fn approx_validity_check(s: &AtomScenario, epsilon: f64, delta: f64) -> f64 {
    let mut points: Vec<f64> =
        s.h0.members()
            .flat_map(|i| s.coordinates[i].atoms.iter().map(|a| a.value))
            .collect();
    points.push(1.0);
    points.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    points.dedup();
    let mf = s.m as f64;
    let mut worst = f64::NEG_INFINITY;
    for &t in &points {
        let sum: f64 = s.h0.members().map(|i| s.coordinates[i].cdf(t)).sum();
        worst = worst.max(sum - mf * (t * (1.0 + epsilon) + delta));
    }
    worst
}

/// Worst slack of the exact compound validity condition Σ F_i(t) ≤ m·t.
pub fn compound_validity_check(s: &AtomScenario) -> f64 {
    approx_validity_check(s, 0.0, 0.0)
}

/// Prepared sampler with per-coordinate cumulative masses.
pub struct Sampler<'a> {
    scenario: &'a AtomScenario,
    /// For independent coordinates: (cumulative mass, value) pairs.
    cum: Vec<Vec<(f64, f64)>>,
}

impl<'a> Sampler<'a> {
    pub fn new(scenario: &'a AtomScenario) -> Self {
        let cum = scenario
            .coordinates
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                c.atoms
                    .iter()
                    .map(|a| {
                        acc += a.mass;
                        (acc, a.value)
                    })
                    .collect()
            })
            .collect();
        Sampler { scenario, cum }
    }

    /// Draw replicate `replicate` of the stream keyed by `seed` into `out`.
    pub fn draw_into(&self, seed: u64, replicate: u64, out: &mut Vec<f64>) {
        let mut rng = substream(seed, replicate);
        out.clear();
        match &self.scenario.coupling {
            Coupling::Independent => {
                for cum in &self.cum {
                    let u: f64 = rng.gen();
                    let idx = cum.partition_point(|&(c, _)| c <= u);
                    out.push(cum.get(idx).map_or(1.0, |&(_, v)| v));
                }
            }
            Coupling::SharedBins { bins } => {
                out.resize(self.scenario.m, 1.0);
                for bin in bins {
                    let u: f64 = rng.gen();
                    if u < bin.prob {
                        for &c in &bin.coords {
                            out[c] = bin.value;
                        }
                    }
                }
            }
        }
    }
}

/// One deterministic draw from the scenario's coupling.
pub fn sample(s: &AtomScenario, seed: u64, replicate: u64) -> SampleDraw {
    let sampler = Sampler::new(s);
    let mut values = Vec::with_capacity(s.m);
    sampler.draw_into(seed, replicate, &mut values);
    SampleDraw {
        p: PValueVector::new(values).expect("atom values lie in [0,1]"),
        h0: s.h0.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bh::{bh_reject, fdp};

    #[test]
    fn prop2_layout_and_validity() {
        let s = prop2_scenario(0.1, 30).unwrap();
        assert_eq!(s.m(), 30);
        assert_eq!(s.h0().len(), 17);
        assert!((s.exact_fdr().unwrap() - 7.0 / 60.0).abs() < 1e-15);
        let v = compound_validity_check(&s);
        assert!(v.abs() <= 1e-12, "tight at 1.5/m, got {v}");
    }

    #[test]
    fn prop2_preconditions() {
        assert!(prop2_scenario(0.1, 14).is_err());
        assert!(prop2_scenario(0.3, 100).is_err());
        assert!(prop2_scenario(0.5, 3).is_ok());
    }

    #[test]
    fn prop2_per_draw_fdp_values() {
        let s = prop2_scenario(0.1, 30).unwrap();
        let k = 5.0;
        let (high, low) = (2.0 / (3.0 * k), 1.0 / (2.0 * k));
        let mut seen_high = false;
        let mut seen_low = false;
        for rep in 0..200 {
            let draw = sample(&s, 11, rep);
            let res = bh_reject(&draw.p, 0.1).unwrap();
            let f = fdp(&res.rejected, &draw.h0);
            assert!(f == high || f == low, "unexpected FDP {f}");
            seen_high |= f == high;
            seen_low |= f == low;
            if f == high {
                // The 3k-rejection branch: both randomized nulls plus every
                // non-null, and nothing else.
                assert_eq!(res.k_hat, 15);
                let mut expect: Vec<usize> = vec![0, 1];
                expect.extend(17..30);
                assert_eq!(res.rejected, expect);
            } else {
                assert_eq!(res.k_hat, 10);
            }
        }
        assert!(seen_high && seen_low);
    }

    #[test]
    fn prop4_values_and_validity() {
        let s = prop4_scenario(0.2, 10).unwrap();
        assert!((s.exact_fdr().unwrap() - 0.21).abs() < 1e-15);
        let v = compound_validity_check(&s);
        assert!(v.abs() <= 1e-12, "tight at alpha/m and 2alpha/m, got {v}");
        assert_eq!(prop4_scenario(0.0, 5).unwrap().exact_fdr(), Some(0.0));
        assert!(prop4_scenario(0.7, 10).is_err());
        assert!(prop4_scenario(0.2, 1).is_err());
        // Per-draw FDP under the global null is an indicator.
        for rep in 0..200 {
            let draw = sample(&s, 5, rep);
            let res = bh_reject(&draw.p, 0.2).unwrap();
            let f = fdp(&res.rejected, &draw.h0);
            assert!(f == 0.0 || f == 1.0);
        }
    }

    #[test]
    fn prop5_structure_and_exact_value() {
        let s = prop5_scenario(0.25, 3).unwrap();
        match s.coupling() {
            Coupling::SharedBins { bins } => {
                assert_eq!(bins.len(), 2);
                assert_eq!(bins[0].coords, vec![0]);
                assert_eq!(bins[1].coords, vec![1, 2]);
            }
            _ => panic!("expected shared bins"),
        }
        assert!((s.exact_fdr().unwrap() - 0.34375).abs() < 1e-15);
        assert!(compound_validity_check(&s) <= 1e-12);
        // Single-hypothesis edge: one bin, FDR = alpha'.
        let s1 = prop5_scenario(0.4, 1).unwrap();
        assert!((s1.exact_fdr().unwrap() - 0.4).abs() < 1e-15);
        // At alpha = 1 the exact value is withheld.
        assert_eq!(prop5_scenario(1.0, 5).unwrap().exact_fdr(), None);
    }

    #[test]
    fn prop5_exact_beats_paper_lower_bound() {
        for &alpha in &[0.05, 0.1, 0.25, 0.5, 0.9] {
            for &m in &[1usize, 3, 10, 55, 300] {
                let s = prop5_scenario(alpha, m).unwrap();
                let hm = harmonic(m).unwrap();
                let bound = 3.0 / 8.0 * (alpha * hm).min(1.0);
                let exact = s.exact_fdr().unwrap();
                assert!(
                    exact >= bound - 1e-12,
                    "alpha={alpha} m={m}: exact {exact} < bound {bound}"
                );
            }
        }
    }

    #[test]
    fn prop5_draws_share_bins() {
        let s = prop5_scenario(0.25, 10).unwrap();
        let bins = match s.coupling() {
            Coupling::SharedBins { bins } => bins.clone(),
            _ => unreachable!(),
        };
        for rep in 0..100 {
            let draw = sample(&s, 3, rep);
            for bin in &bins {
                let first = draw.p.values()[bin.coords[0]];
                for &c in &bin.coords {
                    assert_eq!(draw.p.values()[c], first);
                }
            }
        }
    }

    #[test]
    fn discrete_uniform_is_tightly_valid() {
        let s = discrete_uniform_scenario(0.2, 100).unwrap();
        let v = compound_validity_check(&s);
        assert!(v <= 1e-12, "grid uniform should be valid, slack {v}");
        assert!(discrete_uniform_scenario(0.3, 100).is_err());
    }

    #[test]
    fn random_scenarios_valid_and_deterministic() {
        for seed in 0..100 {
            let s = random_atom_scenario(50, seed, 12);
            assert!(
                compound_validity_check(&s) <= 0.0,
                "seed {seed} violates validity"
            );
        }
        let a = random_atom_scenario(50, 7, 12);
        let b = random_atom_scenario(50, 7, 12);
        assert_eq!(a, b);
        let g = random_global_null_scenario(40, 3, 8);
        assert_eq!(g.h0().len(), 40);
        assert!(compound_validity_check(&g) <= 0.0);
    }

    #[test]
    fn gamma_constrained_scenarios_respect_the_cap() {
        let (alpha, gamma) = (0.1, 0.2);
        for seed in 0..50 {
            let s = random_gamma_scenario(50, seed, 12, alpha, gamma);
            assert!(compound_validity_check(&s) <= 0.0);
            for i in s.h0().members() {
                let at_alpha = s.coordinates()[i].cdf(alpha);
                assert!(
                    at_alpha <= gamma + 1e-12,
                    "seed {seed} coord {i}: {at_alpha}"
                );
            }
        }
    }

    #[test]
    fn inflated_scenarios_pass_the_relaxed_check() {
        let (eps, delta) = (0.25, 0.01);
        for seed in 0..20 {
            let base = random_atom_scenario(40, seed, 10);
            let approx = inflate_to_approx(&base, eps, delta).unwrap();
            assert!(approx_validity_check(&approx, eps, delta) <= 1e-12);
        }
    }

    #[test]
    fn deterministic_coordinates_always_hit_their_atom() {
        let s = prop2_scenario(0.1, 30).unwrap();
        let v = bh_threshold(0.1, 10, 30);
        for rep in 0..50 {
            let draw = sample(&s, 1, rep);
            assert_eq!(draw.p.values()[1], v);
        }
    }

    #[test]
    fn sample_frequencies_match_masses() {
        let s = prop4_scenario(0.2, 10).unwrap();
        let reps = 100_000u64;
        let v1 = bh_threshold(0.2, 1, 10);
        let mut hits = 0u64;
        for rep in 0..reps {
            let draw = sample(&s, 21, rep);
            if draw.p.values()[0] == v1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        let se = (0.2 * 0.8 / reps as f64).sqrt();
        assert!((freq - 0.2).abs() <= 3.0 * se, "freq {freq}");
    }

    #[test]
    fn scenario_json_roundtrips_bit_exactly() {
        let scenarios = vec![
            prop2_scenario(0.1, 30).unwrap(),
            prop4_scenario(0.2, 10).unwrap(),
            prop5_scenario(0.25, 10).unwrap(),
            random_atom_scenario(20, 5, 6),
        ];
        for s in scenarios {
            let json = s.to_json();
            let back = AtomScenario::from_json(&json).unwrap();
            assert_eq!(s, back);
            assert_eq!(json, back.to_json());
        }
    }
}
