//! Independent oracles for the test suites: exact integer combinatorics,
//! high-precision series, adaptive quadrature, brute-force enumeration, and a
//! small dense LP solver.
//!
//! Nothing in here shares code with the implementations under test; each
//! oracle recomputes its target from first principles, usually by a slower
//! but more obviously correct route.

use num_bigint::BigUint;

// ---------------------------------------------------------------------------
// Exact combinatorics
// ---------------------------------------------------------------------------

/// C(n, k) as an exact big integer.
pub fn big_choose(n: u64, k: u64) -> BigUint {
    assert!(k <= n);
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u64);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Natural log of a positive big integer, accurate to a few ulps: the top
/// 64 bits carry the mantissa, the rest contributes an exact power of two.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    assert!(bits > 0, "ln of zero");
    if bits <= 64 {
        let v: u64 = x.to_u64_digits().first().copied().unwrap_or(0);
        return (v as f64).ln();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    let v: u64 = top.to_u64_digits()[0];
    (v as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// ln C(n, k) through exact integer arithmetic.
pub fn exact_log_choose(n: u64, k: u64) -> f64 {
    ln_big(&big_choose(n, k))
}

// ---------------------------------------------------------------------------
// Error-function series
// ---------------------------------------------------------------------------

/// erfc by the alternating Maclaurin series of erf; accurate to ~1e-13 for
/// |x| ≤ 3 (cancellation grows beyond that).
pub fn erfc_series(x: f64) -> f64 {
    assert!(x.abs() <= 3.0, "series oracle limited to |x| <= 3");
    let mut term = x;
    let mut sum = 0.0;
    let mut n = 0u32;
    loop {
        sum += term / (2 * n + 1) as f64;
        n += 1;
        term *= -x * x / n as f64;
        if (term / (2 * n + 1) as f64).abs() < 1e-18 {
            break;
        }
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Standard normal survival via the series oracle (|z| ≤ 4).
pub fn normal_sf_series(z: f64) -> f64 {
    0.5 * erfc_series(z / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Beta CDF by adaptive quadrature
// ---------------------------------------------------------------------------

/// Γ(j/2) for j ≥ 1, built exactly from Γ(1/2) = √π and Γ(1) = 1.
fn gamma_half(j: u64) -> f64 {
    assert!(j >= 1);
    if j == 1 {
        std::f64::consts::PI.sqrt()
    } else if j == 2 {
        1.0
    } else {
        (j as f64 / 2.0 - 1.0) * gamma_half(j - 2)
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)] // recursion carries precomputed endpoint values
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Regularized incomplete beta I_x(a, b) for half-integer shapes, by
/// adaptive Simpson quadrature after the substitution x = sin²θ (which
/// removes the endpoint singularities for a, b ≥ 1/2).
pub fn beta_cdf_quadrature(x: f64, a2: u64, b2: u64) -> f64 {
    assert!((0.0..=1.0).contains(&x));
    assert!(a2 >= 1 && b2 >= 1, "shapes are passed doubled: a2 = 2a");
    let a = a2 as f64 / 2.0;
    let b = b2 as f64 / 2.0;
    let beta = gamma_half(a2) * gamma_half(b2) / gamma_half(a2 + b2);
    let g = move |theta: f64| {
        2.0 * theta.sin().powf(2.0 * a - 1.0) * theta.cos().powf(2.0 * b - 1.0) / beta
    };
    let hi = x.sqrt().asin();
    if hi == 0.0 {
        return 0.0;
    }
    let fa = g(0.0);
    let fb = g(hi);
    let fm = g(0.5 * hi);
    let whole = simpson(0.0, hi, fa, fm, fb);
    adaptive_simpson(&g, 0.0, hi, fa, fm, fb, whole, 1e-13, 48)
}

// ---------------------------------------------------------------------------
// Hypergeometric enumeration
// ---------------------------------------------------------------------------

/// Exact one-sided tail P(X ≥ a) for the 2×2 table [[a,b],[c,d]] with all
/// margins fixed, via integer enumeration. Totals up to ~60 stay exact in
/// u128.
pub fn hypergeom_tail_exact(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let n = r1 + r2;
    assert!(n <= 60, "exact enumeration oracle limited to small tables");
    let choose = |n: u64, k: u64| -> u128 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc
    };
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let mut num: u128 = 0;
    for x in lo.max(a)..=hi {
        num += choose(r1, x) * choose(r2, c1 - x);
    }
    let den = choose(n, c1);
    num as f64 / den as f64
}

// ---------------------------------------------------------------------------
// Poisson closed forms
// ---------------------------------------------------------------------------

/// P(Pois(λ) ≥ k) from the finite closed form 1 − e^{-λ} Σ_{j<k} λ^j/j!,
/// exact up to rounding for small k.
pub fn poisson_tail_closed(lambda: f64, k: u64) -> f64 {
    assert!(k <= 60, "closed-form oracle limited to small k");
    if k == 0 {
        return 1.0;
    }
    let mut head = 0.0;
    let mut pmf = (-lambda).exp();
    for j in 0..k {
        head += pmf;
        pmf *= lambda / (j as f64 + 1.0);
    }
    1.0 - head
}

// ---------------------------------------------------------------------------
// Dense simplex for small LPs
// ---------------------------------------------------------------------------

/// Maximize c·x subject to A·x ≤ b, x ≥ 0, where b ≥ 0 (so the origin is
/// feasible). Dense tableau simplex with Bland's rule; meant for tiny
/// problems where exactness matters more than speed.
pub fn simplex_maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    assert!(b.iter().all(|&v| v >= 0.0), "origin must be feasible");
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m + 1];
    for i in 0..m {
        assert_eq!(a[i].len(), n);
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    for _iter in 0..10_000 {
        // Bland: the lowest-index improving column.
        let Some(pivot_col) = (0..n + m).find(|&j| t[m][j] < -1e-11) else {
            return t[m][width - 1];
        };
        let mut pivot_row = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][pivot_col] > 1e-11 {
                let ratio = t[i][width - 1] / t[i][pivot_col];
                let better = ratio < best_ratio - 1e-12
                    || ((ratio - best_ratio).abs() <= 1e-12
                        && pivot_row.is_some_and(|r: usize| basis[i] < basis[r]));
                if better {
                    best_ratio = ratio;
                    pivot_row = Some(i);
                }
            }
        }
        let r = pivot_row.expect("objective is bounded on this feasible set");
        let scale = t[r][pivot_col];
        for v in t[r].iter_mut() {
            *v /= scale;
        }
        let pivot = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let factor = row[pivot_col];
                if factor != 0.0 {
                    for (dst, &src) in row.iter_mut().zip(&pivot) {
                        *dst -= factor * src;
                    }
                }
            }
        }
        basis[r] = pivot_col;
    }
    panic!("simplex failed to terminate");
}

/// For each data value x_i, the supremum of g(x_i) over convex nonincreasing
/// g: [0,∞) → [0,1] whose drops between consecutive order statistics (with 0
/// prepended and g valued 0 at +∞) stay within `delta`.
///
/// The supremum over the full class is attained by a piecewise-linear
/// function with knots at the order statistics, so a finite LP over the knot
/// values is exact. Returned in the order of the input values.
pub fn decreasing_envelope_lp(x: &[f64], delta: f64) -> Vec<f64> {
    assert!(!x.is_empty());
    let mut knots: Vec<f64> = x.to_vec();
    knots.push(0.0);
    knots.sort_by(|p, q| p.partial_cmp(q).unwrap());
    knots.dedup();
    let q = knots.len(); // variables h_0..h_{q-1}
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_rows: Vec<f64> = Vec::new();
    let mut push = |row: Vec<f64>, rhs: f64| {
        a_rows.push(row);
        b_rows.push(rhs);
    };
    // Range: h_j <= 1.
    for j in 0..q {
        let mut row = vec![0.0; q];
        row[j] = 1.0;
        push(row, 1.0);
    }
    // Monotone: h_{j+1} - h_j <= 0.
    for j in 0..q - 1 {
        let mut row = vec![0.0; q];
        row[j + 1] = 1.0;
        row[j] = -1.0;
        push(row, 0.0);
    }
    // Convexity across interior knots (cross-multiplied slopes).
    for j in 1..q - 1 {
        let left = knots[j] - knots[j - 1];
        let right = knots[j + 1] - knots[j];
        let mut row = vec![0.0; q];
        row[j - 1] -= right;
        row[j] += right;
        row[j] += left;
        row[j + 1] -= left;
        push(row, 0.0);
    }
    // Gap bound between consecutive distinct knots, and at the tail.
    for j in 0..q - 1 {
        let mut row = vec![0.0; q];
        row[j] = 1.0;
        row[j + 1] = -1.0;
        push(row, delta);
    }
    let mut row = vec![0.0; q];
    row[q - 1] = 1.0;
    push(row, delta);

    x.iter()
        .map(|xi| {
            let pos = knots.partition_point(|&v| v < *xi);
            debug_assert_eq!(knots[pos], *xi);
            let mut c = vec![0.0; q];
            c[pos] = 1.0;
            simplex_maximize(&a_rows, &b_rows, &c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_choose_known_values() {
        assert_eq!(big_choose(4, 2), BigUint::from(6u32));
        assert_eq!(big_choose(52, 5), BigUint::from(2_598_960u64));
    }

    #[test]
    fn ln_big_matches_f64_for_small_inputs() {
        let x = BigUint::from(123_456_789u64);
        assert!((ln_big(&x) - (123_456_789f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn erfc_series_endpoint_values() {
        assert!((erfc_series(0.0) - 1.0).abs() < 1e-15);
        // erf is odd.
        assert!((erfc_series(1.3) + erfc_series(-1.3) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn quadrature_uniform_case() {
        // Beta(1, 1) is the uniform distribution.
        for x in [0.1, 0.5, 0.93] {
            assert!((beta_cdf_quadrature(x, 2, 2) - x).abs() < 1e-11);
        }
    }

    #[test]
    fn hypergeom_certain_tail() {
        assert_eq!(hypergeom_tail_exact(0, 3, 0, 4), 1.0);
    }

    #[test]
    fn simplex_solves_a_textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36.
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        let b = vec![4.0, 12.0, 18.0];
        let c = vec![3.0, 5.0];
        assert!((simplex_maximize(&a, &b, &c) - 36.0).abs() < 1e-10);
    }

    #[test]
    fn envelope_lp_single_point_saturates() {
        // delta = 1: the constant-one function is feasible.
        let sup = decreasing_envelope_lp(&[2.7], 1.0);
        assert!((sup[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn envelope_lp_two_points_hand_value() {
        // Points {1, 2} with delta = 0.3: the tail knot is capped at delta,
        // and the drop constraints allow at most delta more at each step
        // moving left, subject to convexity. Chain: h(2) <= 0.3,
        // h(1) <= 0.6, both achievable by a straight line of slope -0.3.
        let sup = decreasing_envelope_lp(&[1.0, 2.0], 0.3);
        assert!((sup[0] - 0.6).abs() < 1e-10, "got {}", sup[0]);
        assert!((sup[1] - 0.3).abs() < 1e-10, "got {}", sup[1]);
    }
}
