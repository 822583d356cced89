//! First-order Marcum Q-function.
//!
//! Q₁(a, b) is the survival function of a non-central chi distribution with two
//! degrees of freedom. Writing x = a²/2 and y = b²/2 it equals P(Y ≤ X) for
//! independent X ~ Poisson(x), Y ~ Poisson(y):
//!
//! ```text
//! Q₁(a, b) = Σₙ P(X = n) · P(Y ≤ n)
//! ```
//!
//! Every term is non-negative, so the sum has no cancellation and truncating the
//! Poisson tails of X gives a controlled absolute error.

use super::gamma::{gamma_q_unchecked, ln_gamma};
use crate::error::{domain, Result};

/// Number of standard deviations of the Poisson(x) weight kept on each side.
const TAIL_SIGMAS: f64 = 12.0;
const TAIL_PAD: f64 = 40.0;

pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("marcum_q1 needs finite arguments, got a = {a}, b = {b}")));
    }
    if a < 0.0 || b < 0.0 {
        return Err(domain(format!("marcum_q1 needs a, b >= 0, got a = {a}, b = {b}")));
    }
    Ok(marcum_q1_unchecked(a, b))
}

fn poisson_ln_pmf(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + n as f64 * mean.ln() - ln_gamma(n as f64 + 1.0)
}

pub(crate) fn marcum_q1_unchecked(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let x = 0.5 * a * a;
    let y = 0.5 * b * b;
    let spread = TAIL_SIGMAS * x.sqrt();
    let n_lo = (x - spread - TAIL_PAD).max(0.0).floor() as u64;
    let n_hi = (x + spread + TAIL_PAD).ceil() as u64;

    // P(Y <= n_lo) = Q(n_lo + 1, y)
    let mut cdf_y = gamma_q_unchecked(n_lo as f64 + 1.0, y);
    let mut pmf_y = poisson_ln_pmf(y, n_lo).exp();
    let mut pmf_x = poisson_ln_pmf(x, n_lo).exp();
    let mut sum = pmf_x * cdf_y;
    for n in (n_lo + 1)..=n_hi {
        let nf = n as f64;
        pmf_x *= x / nf;
        pmf_y *= y / nf;
        cdf_y = (cdf_y + pmf_y).min(1.0);
        sum += pmf_x * cdf_y;
        if nf > x && pmf_x < 1e-20 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Modified Bessel I₀ via its power series; only used by the oracle below.
    fn bessel_i0(z: f64) -> f64 {
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                return sum;
            }
        }
    }

    /// Q₁(a,b) = ∫_b^∞ t exp(−(t²+a²)/2) I₀(at) dt by composite Simpson.
    fn marcum_by_integration(a: f64, b: f64) -> f64 {
        let hi = b.max(a) + 40.0;
        let n = 200_000;
        let h = (hi - b) / n as f64;
        let f = |t: f64| t * (-(t * t + a * a) / 2.0).exp() * bessel_i0(a * t);
        let mut s = f(b) + f(hi);
        for i in 1..n {
            let t = b + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        s * h / 3.0
    }

    #[test]
    fn boundary_identities() {
        assert_eq!(marcum_q1(2.828, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(marcum_q1(0.0, 1.5).unwrap(), (-1.125f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(marcum_q1(0.0, 1.5).unwrap(), 0.324_652_467_358_349_9, epsilon = 1e-12);
    }

    #[test]
    fn matches_integral_oracle() {
        let a = 8f64.sqrt();
        let oracle = marcum_by_integration(a, 1.0);
        assert_abs_diff_eq!(oracle, 0.983_698_468_470_987, epsilon = 1e-11);
        assert_abs_diff_eq!(marcum_q1(a, 1.0).unwrap(), oracle, epsilon = 1e-10);
        for (a, b) in [(1.0, 2.0), (2.0, 2.0), (4.0, 3.0), (4.0, 6.5), (0.3, 0.1), (6.0, 1.0)] {
            let oracle = marcum_by_integration(a, b);
            assert_abs_diff_eq!(marcum_q1(a, b).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(marcum_q1(f64::NAN, 1.0).is_err());
        assert!(marcum_q1(1.0, f64::INFINITY).is_err());
        assert!(marcum_q1(-1.0, 1.0).is_err());
    }

    #[test]
    fn monotone_on_grid() {
        let grid: Vec<f64> = (0..60).map(|i| i as f64 * 0.15).collect();
        for &a in &grid {
            let mut prev = 1.0;
            for &b in &grid {
                let q = marcum_q1(a, b).unwrap();
                assert!(q <= prev + 1e-14, "not decreasing in b at a={a}, b={b}");
                assert!((0.0..=1.0).contains(&q));
                prev = q;
            }
        }
        for &b in &grid {
            let mut prev = 0.0;
            for &a in &grid {
                let q = marcum_q1(a, b).unwrap();
                assert!(q >= prev - 1e-14, "not increasing in a at a={a}, b={b}");
                prev = q;
            }
        }
    }
}
