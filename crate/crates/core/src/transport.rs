//! Transport problem: two exterior nodes, each behind its own gap.
//!
//! Node 0 sits below a gap in the lower wall. Node 1 sits either above a gap
//! in the upper wall ([`TransportCase::Opposite`]) or below a second gap in
//! the lower wall ([`TransportCase::SameSide`]). After unfolding, a ray that
//! leaves node 0 at inclination `phi` and bounces `c` times crosses the
//! receiving wall at height `H_c = (c + 1) w + |y0|`, so the receiver is
//! reached through region `c` iff that crossing lands inside the receiving
//! gap. Rays crossing the opposite wall need an even `c`, rays returning to
//! the lower wall an odd one.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{domain, Error, Result};
use crate::geometry2d::Side;
use crate::mass2d::{mass_quadrature, region_mass, MassBreakdown, MassMethod};
use crate::region::{RadialBounds, ReflectionRegion};
use crate::specfun::inc_gamma_span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportCase {
    /// Receiving gap in the upper wall; even reflection counts.
    Opposite,
    /// Receiving gap in the lower wall; odd reflection counts.
    SameSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportGeometry {
    pub w: f64,
    pub length: f64,
    pub case: TransportCase,
    /// `[x_l1, x_l2]`, the gap in front of node 0.
    pub tx_gap: [f64; 2],
    /// `[x_u1, x_u2]` in the upper wall, or `[x_l3, x_l4]` in the lower wall.
    pub rx_gap: [f64; 2],
    pub x0: f64,
    /// Below the lower wall, `y0 < 0`.
    pub y0: f64,
    pub x1: f64,
    /// Above the upper wall (`y1 > w`) or below the lower wall (`y1 < 0`).
    pub y1: f64,
}

/// Reflection count and unfolded length of the shortest admissible path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPath {
    pub reflections: usize,
    pub distance: f64,
    pub side: Side,
}

/// Point-to-point path between two nodes under the same wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case2Path {
    pub phi: f64,
    pub distance: f64,
    /// Odd count, and `phi` between the re-entry angle and the escape angle.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    Quadrature,
    /// Second-order expansion of both incomplete-gamma terms about the mid-angle.
    Expansion,
    LeadingOrder,
}

/// Which link model a pair average uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkProbability {
    /// Marcum-Q link probability.
    Exact,
    /// Fitted exponential `exp(-lambda_c r^m)`.
    Approx,
}

/// Axis-aligned rectangle of admissible node positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl NodeRegion {
    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.x.iter().chain(&self.y).all(|v| v.is_finite()) && self.x[1] > self.x[0] && self.y[1] > self.y[0];
        if ok {
            Ok(())
        } else {
            Err(domain(format!("{name} region must have positive area, got {self:?}")))
        }
    }

    /// Point at unit-square coordinates `(u, v)`.
    pub fn point(&self, u: f64, v: f64) -> [f64; 2] {
        [self.x[0] + u * (self.x[1] - self.x[0]), self.y[0] + v * (self.y[1] - self.y[0])]
    }
}

impl TransportGeometry {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Geometry(msg));
        let values = [self.w, self.length, self.x0, self.y0, self.x1, self.y1];
        if !values.iter().chain(&self.tx_gap).chain(&self.rx_gap).all(|v| v.is_finite()) {
            return fail("all transport geometry values must be finite".into());
        }
        if self.w <= 0.0 || self.length <= 0.0 {
            return fail(format!("domain must have positive size, got w = {}, L = {}", self.w, self.length));
        }
        for (name, [lo, hi]) in [("transmitter", self.tx_gap), ("receiver", self.rx_gap)] {
            if !(lo < hi) || lo < 0.0 || hi > self.length {
                return fail(format!("{name} gap [{lo}, {hi}] must be non-degenerate and inside the wall"));
            }
        }
        if self.case == TransportCase::SameSide && self.tx_gap[1] > self.rx_gap[0] && self.rx_gap[1] > self.tx_gap[0] {
            return fail("gaps in the same wall must not overlap".into());
        }
        if !(self.tx_gap[0]..=self.tx_gap[1]).contains(&self.x0) {
            return fail(format!("node 0 at x = {} must lie within its gap", self.x0));
        }
        if !(self.rx_gap[0]..=self.rx_gap[1]).contains(&self.x1) {
            return fail(format!("node 1 at x = {} must lie within its gap", self.x1));
        }
        if self.y0 >= 0.0 {
            return fail(format!("node 0 must lie below the lower wall, got y0 = {}", self.y0));
        }
        let beyond = match self.case {
            TransportCase::Opposite => self.y1 > self.w,
            TransportCase::SameSide => self.y1 < 0.0,
        };
        if !beyond {
            return fail(format!("node 1 must lie outside the receiving wall, got y1 = {}", self.y1));
        }
        Ok(())
    }

    pub fn depth0(&self) -> f64 {
        -self.y0
    }

    /// Distance of node 1 beyond the receiving wall.
    pub fn depth1(&self) -> f64 {
        match self.case {
            TransportCase::Opposite => self.y1 - self.w,
            TransportCase::SameSide => -self.y1,
        }
    }

    /// Whether the receiving gap spans exactly the transmitting gap, in
    /// which case only direct rays are counted.
    pub fn exactly_opposite(&self) -> bool {
        self.case == TransportCase::Opposite && self.tx_gap == self.rx_gap
    }

    pub fn parity_allows(&self, c: usize) -> bool {
        match self.case {
            TransportCase::Opposite => c % 2 == 0 && (c == 0 || !self.exactly_opposite()),
            TransportCase::SameSide => c % 2 == 1,
        }
    }

    /// Direction from node 0 towards the receiving gap.
    pub fn main_side(&self) -> Side {
        if 0.5 * (self.rx_gap[0] + self.rx_gap[1]) < self.x0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// Escape angle of node 0 towards `side`.
    pub fn theta(&self, side: Side) -> f64 {
        self.theta_from(side, self.x0, self.depth0())
    }

    fn theta_from(&self, side: Side, x0: f64, depth: f64) -> f64 {
        let reach = match side {
            Side::Left => x0 - self.tx_gap[0],
            Side::Right => self.tx_gap[1] - x0,
        };
        reach.max(0.0).atan2(depth)
    }

    /// Region `c` on `side` for node 0 at `(x0, -depth)`. Empty when the
    /// parity is wrong or no ray through both gaps exists.
    pub fn region_from(&self, c: usize, side: Side, x0: f64, depth: f64) -> ReflectionRegion {
        let height = (c as f64 + 1.0) * self.w + depth;
        let empty = ReflectionRegion {
            reflections: c,
            phi_min: 0.0,
            phi_max: 0.0,
            radial: RadialBounds::Aperture { near: height, lateral: 0.0 },
        };
        if !self.parity_allows(c) {
            return empty;
        }
        let offset = |x: f64| match side {
            Side::Left => x0 - x,
            Side::Right => x - x0,
        };
        let (a, b) = (offset(self.rx_gap[0]), offset(self.rx_gap[1]));
        let (near, far) = (a.min(b), a.max(b));
        if far <= 0.0 {
            return empty;
        }
        let theta = self.theta_from(side, x0, depth);
        let mut phi_min = (near.max(0.0) / height).atan();
        if self.case == TransportCase::SameSide {
            // Rays steeper than this come back down through the transmitting gap.
            let reach = theta.tan() * depth;
            phi_min = phi_min.max(reach.atan2(2.0 * self.w + depth));
        }
        let phi_max = theta.min((far / height).atan());
        ReflectionRegion {
            reflections: c,
            phi_min,
            phi_max,
            radial: RadialBounds::Aperture { near: height, lateral: far },
        }
    }

    pub fn region(&self, c: usize, side: Side) -> ReflectionRegion {
        self.region_from(c, side, self.x0, self.depth0())
    }

    /// Region `c` towards the receiving gap for the opposite-wall case.
    pub fn case1_bounds(&self, c: usize) -> ReflectionRegion {
        let mut r = self.region(c, self.main_side());
        if self.case != TransportCase::Opposite {
            r.phi_max = r.phi_min;
        }
        r
    }

    /// No direct ray reaches the opposite gap: `x0 - (|y0| + w) tan(theta) > x_u2`.
    pub fn los_blocked(&self) -> bool {
        self.case == TransportCase::Opposite
            && self.x0 - (self.depth0() + self.w) * self.theta(Side::Left).tan() > self.rx_gap[1]
    }

    /// Smallest reflection count `<= max_reflections` with a non-empty region.
    pub fn min_reflections(&self, max_reflections: usize) -> Option<usize> {
        (0..=max_reflections).find(|&c| [Side::Left, Side::Right].iter().any(|&s| !self.region(c, s).is_empty()))
    }

    /// Unfolded path from node 0 to node 1 with `c` reflections, same-wall case.
    pub fn case2_path(&self, c: usize) -> Case2Path {
        let run = self.x1 - self.x0;
        let side = if run < 0.0 { Side::Left } else { Side::Right };
        let rise = (c as f64 + 1.0) * self.w + self.depth0() + self.depth1();
        let phi = (run.abs() / rise).atan();
        let theta = self.theta(side);
        let reentry = (theta.tan() * self.depth0()).atan2(2.0 * self.w + self.depth0());
        Case2Path {
            phi,
            distance: rise / phi.cos(),
            feasible: self.case == TransportCase::SameSide && c % 2 == 1 && reentry <= phi && phi <= theta,
        }
    }

    /// Shortest admissible path between node positions `p0` and `p1`.
    pub fn link_path(&self, p0: [f64; 2], p1: [f64; 2], max_reflections: usize) -> Option<LinkPath> {
        let depth = -p0[1];
        let dx = p1[0] - p0[0];
        let side = if dx < 0.0 { Side::Left } else { Side::Right };
        let run = dx.abs();
        (0..=max_reflections).filter(|&c| self.parity_allows(c)).find_map(|c| {
            let cw = c as f64 * self.w;
            let image = if c % 2 == 0 { cw + p1[1] } else { cw + self.w - p1[1] };
            let rise = image + depth;
            let (r, phi) = (run.hypot(rise), run.atan2(rise));
            self.region_from(c, side, p0[0], depth).contains(r, phi).then_some(LinkPath {
                reflections: c,
                distance: r,
                side,
            })
        })
    }

    /// Node 0 anywhere under its gap, down to its configured depth.
    pub fn default_tx_region(&self) -> NodeRegion {
        NodeRegion {
            x: self.tx_gap,
            y: [self.y0, 0.0],
        }
    }

    /// Node 1 anywhere beyond its gap, out to its configured distance.
    pub fn default_rx_region(&self) -> NodeRegion {
        let y = match self.case {
            TransportCase::Opposite => [self.w, self.y1],
            TransportCase::SameSide => [self.y1, 0.0],
        };
        NodeRegion { x: self.rx_gap, y }
    }
}

/// Expanded mass `∫ r H dr dphi` of one aperture region.
fn expanded_region_mass(region: &ReflectionRegion, lambda: f64, m: f64, leading_only: bool) -> f64 {
    let RadialBounds::Aperture { near, lateral } = region.radial else {
        unreachable!("transport regions are aperture regions");
    };
    if region.is_empty() || !lambda.is_finite() {
        return 0.0;
    }
    let s = 2.0 / m;
    let (lo, hi) = (region.phi_min, region.phi_max);
    let mid = 0.5 * (lo + hi);
    let (sin, cos) = mid.sin_cos();
    let x_out = lambda * (lateral / sin).powf(m);
    let x_in = lambda * (near / cos).powf(m);
    let lead = (hi - lo) * inc_gamma_span(s, x_in, x_out);
    if leading_only {
        return lambda.powf(-s) / m * lead;
    }
    let a = m * x_out.powf(s) * (-x_out).exp();
    let b = (2.0 + (2.0 * mid).cos() - m * x_out * cos * cos) / (sin * sin);
    let d = m * x_in.powf(s) * (-x_in).exp();
    let e = (-2.0 + (2.0 * mid).cos() + m * x_in * sin * sin) / (cos * cos);
    // The first-order terms integrate to zero about the mid-angle.
    let quadratic = (a * b + d * e) / 6.0 * ((hi - mid).powi(3) - (lo - mid).powi(3));
    lambda.powf(-s) / m * (lead + quadratic)
}

/// Per-reflection mass `∫ H01 dr1` seen from node 0, summed over both sides.
pub fn transport_mass(tg: &TransportGeometry, model: &ChannelModel, method: TransportMethod) -> Result<MassBreakdown> {
    tg.validate()?;
    let quad = mass_quadrature();
    let m = model.radial_exponent();
    let per_c = (0..=model.max_reflections())
        .filter(|&c| tg.parity_allows(c))
        .map(|c| {
            let mut sum = 0.0;
            for side in [Side::Left, Side::Right] {
                let region = tg.region(c, side);
                sum += match method {
                    TransportMethod::Quadrature => region_mass(&region, model, &quad)
                        .map_err(|source| Error::MassTerm { reflections: c, source })?,
                    TransportMethod::Expansion => expanded_region_mass(&region, model.lambda(c), m, false),
                    TransportMethod::LeadingOrder => expanded_region_mass(&region, model.lambda(c), m, true),
                };
            }
            Ok((c, sum))
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = match method {
        TransportMethod::Quadrature => MassMethod::Quadrature,
        TransportMethod::Expansion => MassMethod::ClosedForm,
        TransportMethod::LeadingOrder => MassMethod::LeadingOrder,
    };
    Ok(MassBreakdown::new(per_c, kind))
}

/// Mass for gaps in opposite walls, by the chosen evaluation path.
pub fn transport_mass_case1(tg: &TransportGeometry, model: &ChannelModel, method: TransportMethod) -> Result<MassBreakdown> {
    if tg.case != TransportCase::Opposite {
        return Err(Error::Geometry("expected gaps in opposite walls".into()));
    }
    transport_mass(tg, model, method)
}

/// Mass for gaps in the same wall, by quadrature.
pub fn transport_mass_case2(tg: &TransportGeometry, model: &ChannelModel) -> Result<MassBreakdown> {
    if tg.case != TransportCase::SameSide {
        return Err(Error::Geometry("expected gaps in the same wall".into()));
    }
    transport_mass(tg, model, TransportMethod::Quadrature)
}

/// Link probability for one pair of node positions; zero without an admissible path.
pub fn pair_link_prob(tg: &TransportGeometry, model: &ChannelModel, p0: [f64; 2], p1: [f64; 2], link: LinkProbability) -> f64 {
    match tg.link_path(p0, p1, model.max_reflections()) {
        None => 0.0,
        Some(path) => match link {
            LinkProbability::Exact => model.exact_unchecked(path.distance, path.reflections),
            LinkProbability::Approx => model.approx_unchecked(path.distance, path.reflections),
        },
    }
}

/// Quasi-random points of the additive recurrence with the generalized
/// golden ratio in `D` dimensions.
pub(crate) fn golden_sequence<const D: usize>(n: usize) -> impl Iterator<Item = [f64; D]> {
    // Root of x^(D+1) = x + 1 by fixed-point iteration.
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (D as f64 + 1.0));
    }
    let mut step = [0.0; D];
    for (i, a) in step.iter_mut().enumerate() {
        *a = g.powi(-(i as i32 + 1)).fract();
    }
    (1..=n).map(move |k| {
        let mut p = [0.0; D];
        for (v, a) in p.iter_mut().zip(step) {
            *v = (0.5 + k as f64 * a).fract();
        }
        p
    })
}

/// Connection probability averaged over node 0 in `v0` and node 1 in `v1`,
/// `1/(V0 V1) ∫∫ H01`, estimated on `samples` quasi-random pairs.
pub fn averaged_connect_prob(
    tg: &TransportGeometry,
    model: &ChannelModel,
    v0: &NodeRegion,
    v1: &NodeRegion,
    link: LinkProbability,
    samples: usize,
) -> Result<f64> {
    tg.validate()?;
    v0.validate("node 0")?;
    v1.validate("node 1")?;
    if v0.x[0] < tg.tx_gap[0] || v0.x[1] > tg.tx_gap[1] || v0.y[1] > 0.0 {
        return Err(domain("node 0 region must lie under the transmitting gap"));
    }
    if samples == 0 {
        return Err(domain("at least one sample is required"));
    }
    let sum: f64 = golden_sequence::<4>(samples)
        .map(|[a, b, c, d]| pair_link_prob(tg, model, v0.point(a, b), v1.point(c, d), link))
        .sum();
    Ok(sum / samples as f64)
}
