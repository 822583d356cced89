//! Connectivity mass of the exterior node in two dimensions, the isolation
//! probabilities built from it, and the first-order full-connectivity estimate.
//!
//! With the approximate link model `H = exp(-lambda_c r^m)` the mass of a
//! reflection region reduces to a single angular integral of a difference of
//! lower incomplete gamma functions. [`mass_numeric`] integrates that angular
//! integrand adaptively; [`mass_closed_form`] replaces it by low-order
//! expansions of the radial bounds (about `phi = 0` for the outer bound and
//! about `phi = theta / 2` for the inner bound of reflected regions).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::channel::ChannelModel;
use crate::error::{domain, Error, Result};
use crate::geometry2d::{Geometry2D, Side};
use crate::region::ReflectionRegion;
use crate::specfun::{erf, inc_gamma_span, Quadrature, QuadratureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMethod {
    ClosedForm,
    Quadrature,
    /// Closed form truncated after its zeroth-order term.
    LeadingOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassBreakdown {
    /// Contribution of each reflection count, in ascending order.
    pub per_c: Vec<(usize, f64)>,
    pub total: f64,
    pub method: MassMethod,
}

impl MassBreakdown {
    pub(crate) fn new(per_c: Vec<(usize, f64)>, method: MassMethod) -> Self {
        let total = per_c.iter().map(|&(_, v)| v).sum();
        Self { per_c, total, method }
    }

    pub fn contribution(&self, c: usize) -> f64 {
        self.per_c.iter().find(|&&(k, _)| k == c).map_or(0.0, |&(_, v)| v)
    }

    /// Share of the total carried by reflection counts `>= from`.
    pub fn tail_fraction(&self, from: usize) -> f64 {
        let tail: f64 = self.per_c.iter().filter(|&&(c, _)| c >= from).map(|&(_, v)| v).sum();
        if self.total > 0.0 {
            tail / self.total
        } else {
            0.0
        }
    }
}

/// Density and size of the interior node population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterInputs {
    pub rho: f64,
    /// Expected number of interior nodes, `rho * area`.
    pub nodes: f64,
    pub area: f64,
}

impl ClusterInputs {
    pub fn from_density(rho: f64, area: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(domain(format!("density must be finite and >= 0, got {rho}")));
        }
        if !(area.is_finite() && area > 0.0) {
            return Err(domain(format!("area must be finite and > 0, got {area}")));
        }
        Ok(Self {
            rho,
            nodes: rho * area,
            area,
        })
    }

    pub fn from_count(n: usize, area: f64) -> Result<Self> {
        if !(area.is_finite() && area > 0.0) {
            return Err(domain(format!("area must be finite and > 0, got {area}")));
        }
        Ok(Self {
            rho: n as f64 / area,
            nodes: n as f64,
            area,
        })
    }
}

pub(crate) fn mass_quadrature() -> Quadrature {
    Quadrature::new(1e-14, 1e-11).with_max_subdivisions(4000)
}

/// `∫ r H dr dphi` over one region by adaptive quadrature in `phi`.
pub(crate) fn region_mass(region: &ReflectionRegion, model: &ChannelModel, quad: &Quadrature) -> Result<f64, QuadratureError> {
    let c = region.reflections;
    if region.is_empty() || !model.lambda(c).is_finite() {
        return Ok(0.0);
    }
    quad.integrate(
        |phi| model.radial_integral(c, 2, region.r_min(phi), region.r_max(phi)),
        region.phi_min,
        region.phi_max,
    )
    .map(|r| r.value)
}

/// Per-reflection mass by adaptive quadrature of the incomplete-gamma integrand.
pub fn mass_numeric(g: &Geometry2D, model: &ChannelModel) -> Result<MassBreakdown> {
    let quad = mass_quadrature();
    let per_c = (0..=model.max_reflections())
        .map(|c| {
            let mut sum = 0.0;
            for side in g.sides.iter() {
                sum += region_mass(&g.region_bounds_side(c, side), model, &quad)
                    .map_err(|source| Error::MassTerm { reflections: c, source })?;
            }
            Ok((c, sum))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MassBreakdown::new(per_c, MassMethod::Quadrature))
}

/// Escape angle above which the expansions are no longer trusted.
pub const EXPANSION_ANGLE_LIMIT: f64 = 0.3;

/// Per-reflection mass from the expanded closed form.
pub fn mass_closed_form(g: &Geometry2D, model: &ChannelModel) -> MassBreakdown {
    let m = model.radial_exponent();
    let per_c = (0..=model.max_reflections())
        .map(|c| {
            let lambda = model.lambda(c);
            let sum = g
                .sides
                .iter()
                .map(|side| {
                    let theta = g.theta(side);
                    if theta > EXPANSION_ANGLE_LIMIT {
                        log::warn!("escape angle {theta:.3} rad exceeds the expansion range");
                    }
                    closed_form_term(c, g.w, g.depth(), theta, lambda, m)
                })
                .sum();
            (c, sum)
        })
        .collect();
    MassBreakdown::new(per_c, MassMethod::ClosedForm)
}

/// Closed-form mass of region `c` for slab width `w`, node depth `depth`,
/// escape angle `theta` and link model `exp(-lambda r^m)`.
pub(crate) fn closed_form_term(c: usize, w: f64, depth: f64, theta: f64, lambda: f64, m: f64) -> f64 {
    if !lambda.is_finite() || theta <= 0.0 {
        return 0.0;
    }
    let s = 2.0 / m;
    let scale = lambda.powf(-s) / m;
    let far = (c as f64 + 1.0) * w + depth;
    let x_far = lambda * far.powf(m);
    // Second-order term of the outer bound far / cos(phi) about phi = 0.
    let outer_curvature = |from: f64| m / 6.0 * (theta.powi(3) - from.powi(3)) * x_far.powf(s) * (-x_far).exp();

    if c == 0 {
        let x_near = lambda * depth.powf(m);
        let inner_curvature = m / 6.0 * theta.powi(3) * x_near.powf(s) * (-x_near).exp();
        return scale * (theta * inc_gamma_span(s, x_near, x_far) + outer_curvature(0.0) - inner_curvature);
    }

    let phi_min = crate::geometry2d::region_bounds_for(c, w, depth, theta).phi_min;
    let width = theta - phi_min;
    let u = 1.5 * theta;
    let (cot, csc2) = (1.0 / u.tan(), 1.0 / u.sin().powi(2));
    let apex = 2.0 * (c as f64 * w + depth) * theta.sin() / u.sin();
    let x_mid = lambda * apex.powf(m);
    let a = m * x_mid.powf(s) * (-x_mid).exp();
    let b = 0.5 * ((m * x_mid - 2.0) * cot * cot - csc2);
    let shifted = phi_min - 0.5 * theta;

    scale
        * (width * inc_gamma_span(s, x_mid, x_far)
            + a * cot * phi_min * width / 2.0
            + a * b / 3.0 * (theta.powi(3) / 8.0 - shifted.powi(3))
            + outer_curvature(phi_min))
}

/// Probability that the exterior node links to no interior node, `exp(-rho * mass)`.
pub fn exterior_isolation_prob(mass_total: f64, inputs: &ClusterInputs) -> Result<f64> {
    if !(mass_total.is_finite() && mass_total >= 0.0) {
        return Err(domain(format!("mass must be finite and >= 0, got {mass_total}")));
    }
    Ok((-inputs.rho * mass_total).exp())
}

/// Probability that at least one of `m` independent exterior nodes bridges in.
pub fn multi_external_bridge_prob(p_single: f64, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_single) {
        return Err(domain(format!("probability must lie in [0, 1], got {p_single}")));
    }
    if m == 0 {
        return Err(domain("at least one exterior node is required"));
    }
    Ok(1.0 - (1.0 - p_single).powi(m as i32))
}

/// Quantities of the Gaussian-kernel treatment of interior isolation.
///
/// With the exponent-two fit, the mass an interior node at `(x, y)` sees is
/// `pi / (4 lh) f(x, L) f(y, w)` with `f(x, l) = erf((l - x) sqrt(lh)) + erf(x sqrt(lh))`
/// and `lh` the decay rate. Expanding both factors to second order about the
/// center gives `-rho * mass ~ log_center + sigma_y (y - w/2)^2 + sigma_x (x - L/2)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianExpansion {
    pub lambda_hat: f64,
    /// `erf(sqrt(lh) L / 2)` and `erf(sqrt(lh) w / 2)`.
    pub erf_half_length: f64,
    pub erf_half_width: f64,
    /// Curvatures of `f(., L)` and `f(., w)` at their maxima.
    pub tau_length: f64,
    pub tau_width: f64,
    /// `-rho pi / lh erf_half_length erf_half_width`.
    pub log_center: f64,
    /// Coefficient of `(y - w/2)^2`.
    pub sigma_y: f64,
    /// Coefficient of `(x - L/2)^2`.
    pub sigma_x: f64,
    /// Polar angle of the domain corner after rescaling.
    pub corner_angle: f64,
}

impl GaussianExpansion {
    pub fn new(lambda_hat: f64, length: f64, width: f64, rho: f64) -> Self {
        let root = lambda_hat.sqrt();
        let tau = |l: f64| 2.0 / PI.sqrt() * l * lambda_hat.powf(1.5) * (-lambda_hat * l * l / 4.0).exp();
        let erf_half_length = erf(root * length / 2.0);
        let erf_half_width = erf(root * width / 2.0);
        let tau_length = tau(length);
        let tau_width = tau(width);
        let sigma_y = rho * PI * tau_width * erf_half_length / (2.0 * lambda_hat);
        let sigma_x = rho * PI * tau_length * erf_half_width / (2.0 * lambda_hat);
        Self {
            lambda_hat,
            erf_half_length,
            erf_half_width,
            tau_length,
            tau_width,
            log_center: -rho * PI / lambda_hat * erf_half_length * erf_half_width,
            sigma_y,
            sigma_x,
            corner_angle: (width * sigma_y.sqrt() / (length * sigma_x.sqrt())).atan(),
        }
    }

    /// Exponent `log_center + sigma_y (y - w/2)^2 + sigma_x (x - L/2)^2`.
    pub fn log_weight(&self, x: f64, y: f64, length: f64, width: f64) -> f64 {
        self.log_center + self.sigma_y * (y - width / 2.0).powi(2) + self.sigma_x * (x - length / 2.0).powi(2)
    }
}

fn erf_pair(x: f64, l: f64, root: f64) -> f64 {
    erf((l - x) * root) + erf(x * root)
}

/// Interior-node mass under the Gaussian kernel `exp(-lh d^2)`, separable form.
pub fn interior_mass_gaussian(x: f64, y: f64, length: f64, width: f64, lambda_hat: f64) -> f64 {
    let root = lambda_hat.sqrt();
    PI / (4.0 * lambda_hat) * erf_pair(x, length, root) * erf_pair(y, width, root)
}

/// Same mass by angular quadrature about `(x, y)`: each wall subtends a fan in
/// which the kernel's radial integral `(1 - exp(-lh R^2)) / (2 lh)` is known.
fn interior_mass_polar(x: f64, y: f64, length: f64, width: f64, lambda_hat: f64, quad: &Quadrature) -> Result<f64, QuadratureError> {
    let radial = |r: f64| -(-lambda_hat * r * r).exp_m1() / (2.0 * lambda_hat);
    // (perpendicular distance to the wall, extent to either side along it)
    let walls = [
        (length - x, y, width - y),
        (x, y, width - y),
        (width - y, x, length - x),
        (y, x, length - x),
    ];
    let mut total = 0.0;
    for (p, below, above) in walls {
        if p <= 0.0 {
            continue;
        }
        let lo = -(below / p).atan();
        let hi = (above / p).atan();
        total += quad.integrate(|phi| radial(p / phi.cos()), lo, hi)?.value;
    }
    Ok(total)
}

fn integrate_rectangle<F>(length: f64, width: f64, quad: &Quadrature, f: F) -> Result<f64, QuadratureError>
where
    F: Fn(f64, f64) -> Result<f64, QuadratureError>,
{
    quad.try_integrate(|y| quad.try_integrate(|x| f(x, y), 0.0, length).map(|r| r.value), 0.0, width)
        .map(|r| r.value)
}

/// `∫∫ f(u, y)` over region `c` on `side`, where `u` is the horizontal
/// distance from the node towards `side`.
fn integrate_region<F>(g: &Geometry2D, c: usize, side: Side, quad: &Quadrature, f: F) -> Result<f64, QuadratureError>
where
    F: Fn(f64, f64) -> f64,
{
    let limit = match side {
        Side::Left => g.x0,
        Side::Right => g.length - g.x0,
    };
    quad.try_integrate(
        |y| {
            let (near, far) = g.offset_range_at(c, side, y);
            let far = far.min(limit);
            if far <= near {
                return Ok(0.0);
            }
            quad.integrate(|u| f(u, y), near, far).map(|r| r.value)
        },
        0.0,
        g.w,
    )
    .map(|r| r.value)
}

fn weight_quadrature() -> Quadrature {
    // Values can be far below 1; only the relative tolerance matters.
    Quadrature::new(1e-300, 1e-8).with_max_subdivisions(400)
}

/// The term `rho ∫ exp(-rho ∫ H_1N dr_1) dr_N` by three routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalIsolation {
    /// Series-expanded closed form.
    pub closed_form: f64,
    /// Quadrature over the node position of the separable erf-product weight.
    pub erf_quadrature: f64,
    /// Quadrature over the node position with the interior mass itself
    /// integrated numerically in polar coordinates.
    pub direct_quadrature: f64,
    pub expansion: GaussianExpansion,
}

pub fn internal_isolation_first_term(g: &Geometry2D, model: &ChannelModel, inputs: &ClusterInputs) -> Result<InternalIsolation> {
    let (length, width, rho) = (g.length, g.w, inputs.rho);
    let lh = model.lambda_two(0);
    let expansion = GaussianExpansion::new(lh, length, width, rho);
    if rho == 0.0 {
        return Ok(InternalIsolation {
            closed_form: 0.0,
            erf_quadrature: 0.0,
            direct_quadrature: 0.0,
            expansion,
        });
    }
    let quad = weight_quadrature();
    let inner = Quadrature::new(1e-300, 1e-12).with_max_subdivisions(200);
    let erf_quadrature = rho
        * integrate_rectangle(length, width, &quad, |x, y| {
            Ok((-rho * interior_mass_gaussian(x, y, length, width, lh)).exp())
        })?;
    let direct_quadrature = rho
        * integrate_rectangle(length, width, &quad, |x, y| {
            Ok((-rho * interior_mass_polar(x, y, length, width, lh, &inner)?).exp())
        })?;
    Ok(InternalIsolation {
        closed_form: rho * internal_first_closed_form(&expansion, length, width),
        erf_quadrature,
        direct_quadrature,
        expansion,
    })
}

/// `∫∫ exp(log_weight) dx dy` over the rectangle after rescaling to polar
/// coordinates and expanding `exp(a sec^2)` about 0 and `exp(b csc^2)` about
/// the corner angle. All exponentials carry the `log_center` factor inside
/// so that large densities neither overflow nor produce `inf * 0`.
pub fn internal_first_closed_form(e: &GaussianExpansion, length: f64, width: f64) -> f64 {
    let (sx, sy) = (e.sigma_x, e.sigma_y);
    if !(sx > 0.0 && sy > 0.0) {
        return 0.0;
    }
    let v = e.corner_angle;
    let a = sx * length * length / 4.0;
    let b = sy * width * width / 4.0;
    let lc = e.log_center;
    let (cot, csc2) = (1.0 / v.tan(), 1.0 / v.sin().powi(2));
    let eb = (b * csc2 + lc).exp();
    let a2 = 2.0 * b * eb * cot * csc2;
    let b2 = b * eb * csc2 * (1.0 + 3.0 * cot * cot + 2.0 * b * cot * cot * csc2);
    let rest = FRAC_PI_2 - v;
    let bracket = v * ((a + lc).exp() - lc.exp()) + a / 3.0 * (a + lc).exp() * v.powi(3) + rest * (eb + a2 * v - lc.exp())
        - a2 / 2.0 * (PI * PI / 4.0 - v * v)
        + b2 / 3.0 * rest.powi(3);
    2.0 / (sx * sy).sqrt() * bracket
}

/// The term `rho ∫ H_0N exp(-rho ∫ H_1N dr_1) dr_N` over regions with at most two reflections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeTerm {
    /// With the separable erf-product weight.
    pub quadrature: f64,
    /// With the weight replaced by its quadratic expansion about the center.
    pub gaussian_form: f64,
}

pub const BRIDGE_MAX_REFLECTIONS: usize = 2;

pub fn internal_isolation_bridge_term(g: &Geometry2D, model: &ChannelModel, inputs: &ClusterInputs) -> Result<BridgeTerm> {
    let rho = inputs.rho;
    if rho == 0.0 {
        return Ok(BridgeTerm {
            quadrature: 0.0,
            gaussian_form: 0.0,
        });
    }
    let lh = model.lambda_two(0);
    let expansion = GaussianExpansion::new(lh, g.length, g.w, rho);
    let quad = weight_quadrature();
    let mut quadrature = 0.0;
    let mut gaussian_form = 0.0;
    for c in 0..=BRIDGE_MAX_REFLECTIONS.min(model.max_reflections()) {
        let rate = model.lambda_two(c);
        if !rate.is_finite() {
            continue;
        }
        let link = |u: f64, y: f64| {
            let rise = g.image_height(c, y) + g.depth();
            -rate * (u * u + rise * rise)
        };
        for side in g.sides.iter() {
            let x_of = |u: f64| match side {
                Side::Left => g.x0 - u,
                Side::Right => g.x0 + u,
            };
            let wrap = |source| Error::MassTerm { reflections: c, source };
            quadrature += integrate_region(g, c, side, &quad, |u, y| {
                (link(u, y) - rho * interior_mass_gaussian(x_of(u), y, g.length, g.w, lh)).exp()
            })
            .map_err(wrap)?;
            gaussian_form += integrate_region(g, c, side, &quad, |u, y| {
                (link(u, y) + expansion.log_weight(x_of(u), y, g.length, g.w)).exp()
            })
            .map_err(wrap)?;
        }
    }
    Ok(BridgeTerm {
        quadrature: rho * quadrature,
        gaussian_form: rho * gaussian_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullConnectivity {
    pub p_fc: f64,
    pub exterior_isolation: f64,
    pub internal_first: f64,
    pub bridge: f64,
    /// The unclamped estimate fell outside `[0, 1]`.
    pub clamped: bool,
}

/// `P_fc ~ 1 - exterior isolation - (internal first term - bridge term)`,
/// every term from its quadrature route.
pub fn full_connectivity_first_order(g: &Geometry2D, model: &ChannelModel, inputs: &ClusterInputs) -> Result<FullConnectivity> {
    let mass = mass_numeric(g, model)?;
    let exterior_isolation = exterior_isolation_prob(mass.total, inputs)?;
    let internal_first = internal_isolation_first_term(g, model, inputs)?.direct_quadrature;
    let bridge = internal_isolation_bridge_term(g, model, inputs)?.quadrature;
    let raw = 1.0 - exterior_isolation - (internal_first - bridge);
    let p_fc = raw.clamp(0.0, 1.0);
    Ok(FullConnectivity {
        p_fc,
        exterior_isolation,
        internal_first,
        bridge,
        clamped: p_fc != raw,
    })
}
