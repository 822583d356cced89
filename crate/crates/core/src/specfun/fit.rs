//! Least-squares fit of `exp(-e^nu * b^mu)` to the Marcum survival curve
//! `b -> Q1(sqrt(2K), b)`.

use serde::{Deserialize, Serialize};

use super::marcum::marcum_q1_unchecked;
use crate::error::{domain, Error, Result};

/// Number of uniformly spaced abscissae in the fit grid.
pub const FIT_GRID_POINTS: usize = 2048;
/// The grid extends to the `b` where Q1 first drops to this level.
pub const FIT_TAIL_LEVEL: f64 = 1e-4;

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Both `nu` and `mu` are free.
    Free,
    /// `mu` is pinned to 2 and only `nu` is fitted.
    FixedTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxFit {
    /// Non-centrality `sqrt(2K)`.
    pub a_parameter: f64,
    pub mode: FitMode,
    pub nu: f64,
    pub mu: f64,
    /// Scale of the fit with the exponent pinned to 2. Equals `nu` in
    /// [`FitMode::FixedTwo`].
    pub nu2: f64,
    /// Largest absolute deviation over the fit grid for (`nu`, `mu`).
    pub sup_error: f64,
}

impl ApproxFit {
    pub fn eval(&self, b: f64) -> f64 {
        (-self.nu.exp() * b.powf(self.mu)).exp()
    }
}

/// Sampled target curve.
struct Target {
    b: Vec<f64>,
    q: Vec<f64>,
}

fn tail_point(a: f64) -> f64 {
    let mut hi = a + 4.0;
    while marcum_q1_unchecked(a, hi) > FIT_TAIL_LEVEL {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if marcum_q1_unchecked(a, mid) > FIT_TAIL_LEVEL {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

fn sample_target(a: f64) -> Target {
    let b_star = tail_point(a);
    let step = b_star / (FIT_GRID_POINTS - 1) as f64;
    let b: Vec<f64> = (0..FIT_GRID_POINTS).map(|i| i as f64 * step).collect();
    let q = b.iter().map(|&b| marcum_q1_unchecked(a, b)).collect();
    Target { b, q }
}

fn model(nu: f64, mu: f64, b: f64) -> f64 {
    (-nu.exp() * b.powf(mu)).exp()
}

fn sse(t: &Target, nu: f64, mu: f64) -> f64 {
    t.b.iter()
        .zip(&t.q)
        .map(|(&b, &q)| {
            let d = model(nu, mu, b) - q;
            d * d
        })
        .sum()
}

fn sup_error(t: &Target, nu: f64, mu: f64) -> f64 {
    t.b.iter()
        .zip(&t.q)
        .map(|(&b, &q)| (model(nu, mu, b) - q).abs())
        .fold(0.0, f64::max)
}

/// Starting point from the straight line `ln(-ln q) = nu + mu ln b`.
fn log_log_guess(t: &Target) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = t
        .b
        .iter()
        .zip(&t.q)
        .filter(|(&b, &q)| b > 0.0 && q > 1e-12 && q < 1.0 - 1e-9)
        .map(|(&b, &q)| (b.ln(), (-q.ln()).ln()))
        .collect();
    if pts.len() < 2 {
        return ((0.5f64).ln(), 2.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let mu = if sxx > 0.0 { (sxy / sxx).max(0.1) } else { 2.0 };
    (my - mu * mx, mu)
}

/// Levenberg–Marquardt over (nu, mu), or over nu alone when `mu_fixed` is set.
fn levenberg_marquardt(t: &Target, start: (f64, f64), mu_fixed: Option<f64>) -> Result<(f64, f64)> {
    let (mut nu, mut mu) = start;
    if let Some(m) = mu_fixed {
        mu = m;
    }
    let mut cost = sse(t, nu, mu);
    let mut damping = 1e-3;

    for _ in 0..MAX_ITER {
        // Normal equations J^T J and J^T r for r = model - q.
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&b, &q) in t.b.iter().zip(&t.q) {
            if b == 0.0 {
                continue;
            }
            let bm = b.powf(mu);
            let f = (-nu.exp() * bm).exp();
            let r = f - q;
            let d_nu = -f * nu.exp() * bm;
            let d_mu = d_nu * b.ln();
            a11 += d_nu * d_nu;
            a12 += d_nu * d_mu;
            a22 += d_mu * d_mu;
            g1 += d_nu * r;
            g2 += d_mu * r;
        }

        let mut accepted = false;
        while damping < 1e12 {
            let (step_nu, step_mu) = if mu_fixed.is_some() {
                (-g1 / (a11 * (1.0 + damping)), 0.0)
            } else {
                let m11 = a11 * (1.0 + damping);
                let m22 = a22 * (1.0 + damping);
                let det = m11 * m22 - a12 * a12;
                if det <= 0.0 || !det.is_finite() {
                    damping *= 10.0;
                    continue;
                }
                ((-g1 * m22 + g2 * a12) / det, (-g2 * m11 + g1 * a12) / det)
            };
            let (nu_new, mu_new) = (nu + step_nu, (mu + step_mu).max(1e-3));
            let cost_new = sse(t, nu_new, mu_new);
            if cost_new.is_finite() && cost_new <= cost {
                let small_step = step_nu.abs() < 1e-13 * (1.0 + nu.abs())
                    && step_mu.abs() < 1e-13 * (1.0 + mu.abs());
                let stalled = cost - cost_new <= 1e-16 * cost.max(1e-300);
                nu = nu_new;
                mu = mu_new;
                cost = cost_new;
                damping = (damping * 0.3).max(1e-12);
                accepted = true;
                if small_step || stalled {
                    return Ok((nu, mu));
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No descent direction at any damping: a (local) minimum.
            return Ok((nu, mu));
        }
    }
    Err(Error::Fit {
        iterations: MAX_ITER,
        sse: cost,
        nu,
        mu,
    })
}

/// Fits `exp(-e^nu b^mu)` to `Q1(sqrt(2K), b)` by least squares on a uniform
/// grid of [`FIT_GRID_POINTS`] points spanning `[0, b*]`, where
/// `Q1(sqrt(2K), b*) = FIT_TAIL_LEVEL`.
///
/// In [`FitMode::Free`] the exponent-two fit is computed as well and stored in
/// `nu2`; `sup_error` always refers to (`nu`, `mu`).
pub fn fit_exponential_approx(k: f64, mode: FitMode) -> Result<ApproxFit> {
    if !k.is_finite() || k < 0.0 {
        return Err(domain(format!("Rice factor must be finite and >= 0, got {k}")));
    }
    let a = (2.0 * k).sqrt();
    let target = sample_target(a);
    let guess = log_log_guess(&target);

    let (nu2, _) = levenberg_marquardt(&target, (guess.0 + (guess.1 - 2.0), 2.0), Some(2.0))?;
    let (nu, mu) = match mode {
        FitMode::FixedTwo => (nu2, 2.0),
        FitMode::Free => {
            let free = levenberg_marquardt(&target, guess, None)?;
            // Guard against a poor local minimum: the free fit must not lose
            // to the constrained one it contains.
            if sse(&target, free.0, free.1) <= sse(&target, nu2, 2.0) {
                free
            } else {
                levenberg_marquardt(&target, (nu2, 2.0), None)?
            }
        }
    };
    Ok(ApproxFit {
        a_parameter: a,
        mode,
        nu,
        mu,
        nu2,
        sup_error: sup_error(&target, nu, mu),
    })
}
