//! Pair-connectedness under Rician fading with per-reflection attenuation.
//!
//! A link of unfolded length `r` that bounces `c` times connects with
//! probability `Q1(sqrt(2K), sqrt(2(K+1) beta r^eta alpha^-c))`. The fitted
//! approximation `Q1(a, b) ~ exp(-e^nu b^mu)` turns this into
//! `exp(-lambda_c r^(mu eta / 2))`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::{fit_exponential_approx, inc_gamma_span, marcum_q1_unchecked, ApproxFit, FitMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Rice factor.
    pub k: f64,
    /// Propagation constant; absorbs transmit power and rate threshold.
    pub beta: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Per-reflection SNR attenuation in `[0, 1]`.
    pub alpha: f64,
    /// Largest reflection count considered.
    pub max_reflections: usize,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.k.is_finite() && self.k >= 0.0) {
            return bad(format!("Rice factor k must be finite and >= 0, got {}", self.k));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta must be finite and > 0, got {}", self.beta));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be finite and > 0, got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub params: ChannelParams,
    pub fit: ApproxFit,
}

impl ChannelModel {
    /// Validates the parameters and fits the exponential approximation for `params.k`.
    pub fn new(params: ChannelParams) -> Result<Self> {
        params.validate()?;
        let fit = fit_exponential_approx(params.k, FitMode::Free)?;
        Ok(Self { params, fit })
    }

    /// Uses a precomputed fit, which must have been made for the same Rice factor.
    pub fn with_fit(params: ChannelParams, fit: ApproxFit) -> Result<Self> {
        params.validate()?;
        let a = (2.0 * params.k).sqrt();
        if (fit.a_parameter - a).abs() > 1e-12 * (1.0 + a) {
            return Err(Error::Config(format!(
                "fit was made for a = {}, channel needs a = {a}",
                fit.a_parameter
            )));
        }
        Ok(Self { params, fit })
    }

    pub fn max_reflections(&self) -> usize {
        self.params.max_reflections
    }

    /// `alpha^-c`, infinite when `alpha = 0` and `c > 0`.
    fn attenuation(&self, c: usize) -> f64 {
        if c == 0 {
            1.0
        } else {
            self.params.alpha.powi(-(c as i32))
        }
    }

    /// Second argument of Q1 for a link of length `r` with `c` reflections.
    pub fn marcum_b(&self, r: f64, c: usize) -> f64 {
        let p = &self.params;
        (2.0 * (p.k + 1.0) * p.beta * r.powf(p.eta) * self.attenuation(c)).sqrt()
    }

    /// Exponent of `r` in the approximate link probability, `mu * eta / 2`.
    pub fn radial_exponent(&self) -> f64 {
        0.5 * self.fit.mu * self.params.eta
    }

    /// Decay rate `lambda_c = e^nu (2(K+1) beta alpha^-c)^(mu/2)`.
    pub fn lambda(&self, c: usize) -> f64 {
        let p = &self.params;
        self.fit.nu.exp() * (2.0 * (p.k + 1.0) * p.beta * self.attenuation(c)).powf(0.5 * self.fit.mu)
    }

    /// Gaussian-form rate `e^nu2 2(K+1) beta alpha^-c` from the exponent-two fit.
    pub fn lambda_two(&self, c: usize) -> f64 {
        let p = &self.params;
        self.fit.nu2.exp() * 2.0 * (p.k + 1.0) * p.beta * self.attenuation(c)
    }

    fn check(&self, r: f64, c: usize) -> Result<()> {
        if !(r.is_finite() && r > 0.0) {
            return Err(domain(format!("link length must be finite and > 0, got {r}")));
        }
        if c > self.params.max_reflections {
            return Err(domain(format!(
                "reflection count {c} exceeds the model limit {}",
                self.params.max_reflections
            )));
        }
        Ok(())
    }

    pub fn connect_prob_exact(&self, r: f64, c: usize) -> Result<f64> {
        self.check(r, c)?;
        Ok(self.exact_unchecked(r, c))
    }

    pub fn connect_prob_approx(&self, r: f64, c: usize) -> Result<f64> {
        self.check(r, c)?;
        Ok(self.approx_unchecked(r, c))
    }

    pub(crate) fn exact_unchecked(&self, r: f64, c: usize) -> f64 {
        let b = self.marcum_b(r, c);
        if !b.is_finite() {
            return 0.0;
        }
        marcum_q1_unchecked(self.fit.a_parameter, b)
    }

    /// `∫_lo^hi r^(dim-1) exp(-lambda_c r^m) dr` with `m` the radial exponent,
    /// through the lower incomplete gamma function. `hi` may be infinite.
    pub fn radial_integral(&self, c: usize, dim: u32, lo: f64, hi: f64) -> f64 {
        radial_integral(self.lambda(c), self.radial_exponent(), dim, lo, hi)
    }

    pub(crate) fn approx_unchecked(&self, r: f64, c: usize) -> f64 {
        let lam = self.lambda(c);
        if !lam.is_finite() {
            return 0.0;
        }
        (-lam * r.powf(self.radial_exponent())).exp()
    }
}

/// `∫_lo^hi r^(dim-1) exp(-lambda r^m) dr
///   = lambda^(-dim/m) / m [γ(dim/m, lambda hi^m) - γ(dim/m, lambda lo^m)]`.
pub fn radial_integral(lambda: f64, m: f64, dim: u32, lo: f64, hi: f64) -> f64 {
    if !lambda.is_finite() || !(hi > lo) {
        return 0.0;
    }
    let s = dim as f64 / m;
    lambda.powf(-s) / m * inc_gamma_span(s, lambda * lo.max(0.0).powf(m), lambda * hi.powf(m))
}

/// Exact link probability `Q1(sqrt(2K), sqrt(2(K+1) beta r^eta alpha^-c))`.
pub fn pair_connect_prob_exact(r: f64, c: usize, model: &ChannelModel) -> Result<f64> {
    model.connect_prob_exact(r, c)
}

/// Approximate link probability `exp(-lambda_c r^(mu eta / 2))`.
pub fn pair_connect_prob_approx(r: f64, c: usize, model: &ChannelModel) -> Result<f64> {
    model.connect_prob_approx(r, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn params(alpha: f64) -> ChannelParams {
        ChannelParams {
            k: 4.0,
            beta: 1e-3,
            eta: 2.0,
            alpha,
            max_reflections: 6,
        }
    }

    fn k4_fit() -> ApproxFit {
        static FIT: OnceLock<ApproxFit> = OnceLock::new();
        *FIT.get_or_init(|| fit_exponential_approx(4.0, FitMode::Free).unwrap())
    }

    fn model(alpha: f64) -> ChannelModel {
        ChannelModel::with_fit(params(alpha), k4_fit()).unwrap()
    }

    #[test]
    fn short_links_always_connect() {
        let m = model(0.6);
        assert!(m.connect_prob_exact(1e-9, 0).unwrap() > 1.0 - 1e-12);
        assert!(m.connect_prob_approx(1e-9, 0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn unit_alpha_ignores_reflections() {
        let m = model(1.0);
        assert_eq!(m.connect_prob_exact(17.0, 0).unwrap(), m.connect_prob_exact(17.0, 5).unwrap());
        assert_eq!(m.lambda(0), m.lambda(5));
    }

    #[test]
    fn reference_link() {
        // Reference from an independent non-central chi-square survival function.
        let h = pair_connect_prob_exact(10.0, 1, &model(0.6)).unwrap();
        assert_abs_diff_eq!(h, 0.964_683_347_260_500_5, epsilon = 1e-10);
    }

    #[test]
    fn approx_half_point() {
        let m = model(0.6);
        let r = (2f64.ln() / m.lambda(2)).powf(1.0 / m.radial_exponent());
        assert_abs_diff_eq!(m.connect_prob_approx(r, 2).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn radial_integral_matches_quadrature() {
        let m = model(0.8);
        let region = crate::geometry2d::Geometry2D::centered(20.0, 100.0, 0.3, -2.0, Default::default())
            .unwrap()
            .region_bounds(1);
        for phi in [region.phi_min, 0.5 * (region.phi_min + region.phi_max), region.phi_max] {
            let (lo, hi) = (region.r_min(phi), region.r_max(phi));
            let direct = crate::specfun::integrate_adaptive(|r| r * m.connect_prob_approx(r, 1).unwrap(), lo, hi, 1e-9).unwrap();
            assert_abs_diff_eq!(m.radial_integral(1, 2, lo, hi), direct, epsilon = 1e-8);
        }
        let tail = crate::specfun::integrate_adaptive(|r| r * r * (-0.01 * r.powf(1.7)).exp(), 3.0, 400.0, 1e-9).unwrap();
        assert_abs_diff_eq!(radial_integral(0.01, 1.7, 3, 3.0, f64::INFINITY), tail, epsilon = 1e-8);
    }

    #[test]
    fn zero_alpha_blocks_reflections() {
        let m = model(0.0);
        assert_eq!(m.connect_prob_exact(5.0, 1).unwrap(), 0.0);
        assert_eq!(m.connect_prob_approx(5.0, 1).unwrap(), 0.0);
        assert!(m.connect_prob_exact(5.0, 0).unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model(0.6);
        assert!(m.connect_prob_exact(0.0, 0).is_err());
        assert!(m.connect_prob_exact(-1.0, 0).is_err());
        assert!(m.connect_prob_exact(1.0, 7).is_err());
        assert!(ChannelModel::with_fit(params(1.5), k4_fit()).is_err());
        let mut p = params(0.5);
        p.k = 2.0;
        assert!(ChannelModel::with_fit(p, k4_fit()).is_err());
    }

    #[test]
    fn approx_tracks_exact_on_fig4_grid() {
        for alpha in [0.5, 0.75, 1.0] {
            let m = model(alpha);
            for c in 0..=6 {
                for i in 1..400 {
                    let r = i as f64 * 0.25;
                    let e = m.connect_prob_exact(r, c).unwrap();
                    let a = m.connect_prob_approx(r, c).unwrap();
                    assert!((e - a).abs() <= 0.05, "alpha {alpha} c {c} r {r}: {e} vs {a}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_in_distance(r in 0.1f64..150.0, dr in 0.0f64..20.0, c in 0usize..=6) {
            let m = model(0.7);
            prop_assert!(m.connect_prob_exact(r + dr, c).unwrap() <= m.connect_prob_exact(r, c).unwrap() + 1e-15);
            prop_assert!(m.connect_prob_approx(r + dr, c).unwrap() <= m.connect_prob_approx(r, c).unwrap());
        }

        #[test]
        fn each_reflection_costs(r in 1.0f64..80.0, c in 0usize..6) {
            let m = model(0.6);
            prop_assert!(m.connect_prob_exact(r, c + 1).unwrap() < m.connect_prob_exact(r, c).unwrap());
            prop_assert!(m.lambda(c + 1) >= m.lambda(c));
        }

        #[test]
        fn approx_within_fit_error(r in 0.1f64..200.0, c in 0usize..=6, alpha in 0.3f64..1.0) {
            let m = model(alpha);
            let gap = (m.connect_prob_exact(r, c).unwrap() - m.connect_prob_approx(r, c).unwrap()).abs();
            // Between grid nodes the deviation can exceed the sampled maximum by a hair.
            prop_assert!(gap <= m.fit.sup_error + 1e-6, "gap {gap} sup {}", m.fit.sup_error);
        }
    }
}
