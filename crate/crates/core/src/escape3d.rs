//! Escape problem in three dimensions.
//!
//! The domain is the slab `0 <= z <= w` over the square `[0, L]^2`, with a
//! circular gap of radius `eps` in the lower face and the exterior node at
//! `(x0, y0, z0)`, `z0 < 0`. Points are addressed from the node by distance
//! `r`, inclination `phi` from the `z` axis and azimuth `varphi` from the `x`
//! axis. On every azimuthal half-plane the reflection regions are exactly the
//! two-dimensional ones, with the escape angle `theta(varphi)` set by how far
//! the gap rim is along that azimuth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{domain, Error, Result};
use crate::geometry2d::region_bounds_for;
use crate::mass2d::{mass_quadrature, MassBreakdown, MassMethod, EXPANSION_ANGLE_LIMIT};
use crate::region::ReflectionRegion;
use crate::specfun::{inc_gamma_span, Quadrature, QuadratureError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry3D {
    pub w: f64,
    /// Side of the square floor plan.
    pub length: f64,
    pub gap_radius: f64,
    pub gap_center: [f64; 2],
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

/// Reflection count and unfolded path length of an interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointClass3D {
    pub reflections: usize,
    pub distance: f64,
}

impl Geometry3D {
    pub fn new(w: f64, length: f64, gap_radius: f64, gap_center: [f64; 2], x0: f64, y0: f64, z0: f64) -> Result<Self> {
        let g = Self {
            w,
            length,
            gap_radius,
            gap_center,
            x0,
            y0,
            z0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Gap in the middle of the lower face, node on its axis.
    pub fn centered(w: f64, length: f64, gap_radius: f64, z0: f64) -> Result<Self> {
        let mid = 0.5 * length;
        Self::new(w, length, gap_radius, [mid, mid], mid, mid, z0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Geometry(msg));
        let [cx, cy] = self.gap_center;
        for (name, v) in [
            ("w", self.w),
            ("length", self.length),
            ("gap_radius", self.gap_radius),
            ("gap_center.x", cx),
            ("gap_center.y", cy),
            ("x0", self.x0),
            ("y0", self.y0),
            ("z0", self.z0),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite, got {v}"));
            }
        }
        if self.w <= 0.0 || self.length <= 0.0 {
            return fail(format!("domain must have positive size, got w = {}, L = {}", self.w, self.length));
        }
        if !(self.gap_radius > 0.0 && self.gap_radius < self.w) {
            return fail(format!("gap radius must satisfy 0 < eps < w, got {}", self.gap_radius));
        }
        if self.z0 >= 0.0 {
            return fail(format!("exterior node must lie below the face (z0 < 0), got {}", self.z0));
        }
        let r = self.gap_radius;
        if cx - r < 0.0 || cx + r > self.length || cy - r < 0.0 || cy + r > self.length {
            return fail("gap must lie within the lower face".into());
        }
        if (self.x0 - cx).hypot(self.y0 - cy) > r * (1.0 + 1e-12) {
            return fail(format!("node ({}, {}) must lie under the gap", self.x0, self.y0));
        }
        Ok(())
    }

    /// Distance of the node below the face, `|z0|`.
    pub fn depth(&self) -> f64 {
        -self.z0
    }

    pub fn volume(&self) -> f64 {
        self.length * self.length * self.w
    }

    pub fn is_on_axis(&self) -> bool {
        self.x0 == self.gap_center[0] && self.y0 == self.gap_center[1]
    }

    /// Horizontal distance from the node's projection to the gap rim along azimuth `varphi`.
    pub fn rim_distance(&self, varphi: f64) -> f64 {
        let (qx, qy) = (self.x0 - self.gap_center[0], self.y0 - self.gap_center[1]);
        let along = qx * varphi.cos() + qy * varphi.sin();
        let disc = along * along - (qx * qx + qy * qy) + self.gap_radius * self.gap_radius;
        (-along + disc.max(0.0).sqrt()).max(0.0)
    }

    /// Escape angle along azimuth `varphi`; `atan(eps / |z0|)` for every
    /// azimuth when the node is on the gap axis.
    pub fn theta(&self, varphi: f64) -> f64 {
        (self.rim_distance(varphi) / self.depth()).atan()
    }

    /// Region `c` on the half-plane at azimuth `varphi`.
    pub fn region_bounds_3d(&self, c: usize, varphi: f64) -> ReflectionRegion {
        region_bounds_for(c, self.w, self.depth(), self.theta(varphi))
    }

    /// Smallest reflection count `c <= max_reflections` reaching `p`, with the unfolded distance.
    pub fn classify_point(&self, p: [f64; 3], max_reflections: usize) -> Result<Option<PointClass3D>> {
        let [x, y, z] = p;
        let inside = |v: f64, hi: f64| v.is_finite() && (0.0..=hi).contains(&v);
        if !(inside(x, self.length) && inside(y, self.length) && inside(z, self.w)) {
            return Err(domain(format!("point ({x}, {y}, {z}) is outside the domain")));
        }
        Ok(self.classify_unchecked(p, max_reflections))
    }

    pub(crate) fn classify_unchecked(&self, p: [f64; 3], max_reflections: usize) -> Option<PointClass3D> {
        let [x, y, z] = p;
        let (dx, dy) = (x - self.x0, y - self.y0);
        let run = dx.hypot(dy);
        let t = self.theta(dy.atan2(dx)).tan();
        let (w, d) = (self.w, self.depth());
        (0..=max_reflections).find_map(|c| {
            let cw = c as f64 * w;
            let image = if c % 2 == 0 { cw + z } else { cw + w - z };
            let rise = image + d;
            (run <= rise * t).then(|| PointClass3D {
                reflections: c,
                distance: run.hypot(rise),
            })
        })
    }

    /// Cumulative ratio `(v0 + v1) / v0` of the first two region volumes.
    pub fn volume_ratio_first_reflection(&self) -> f64 {
        volume_ratio_first_reflection(self.w, self.depth())
    }
}

/// `(v0 + v1) / v0 = 1 + 6(1 + d/w) / (1 + 3d/w + 3(d/w)^2)` for a node at depth `d`.
pub fn volume_ratio_first_reflection(w: f64, depth: f64) -> f64 {
    let q = depth / w;
    1.0 + 6.0 * (1.0 + q) / (1.0 + 3.0 * q + 3.0 * q * q)
}

/// `∫ r^2 H dr sin(phi) dphi` over region `c` on one azimuthal half-plane.
pub fn fixed_azimuth_mass(g: &Geometry3D, model: &ChannelModel, c: usize, varphi: f64) -> Result<f64, QuadratureError> {
    fixed_azimuth_mass_with(g, model, c, varphi, &mass_quadrature())
}

fn fixed_azimuth_mass_with(g: &Geometry3D, model: &ChannelModel, c: usize, varphi: f64, quad: &Quadrature) -> Result<f64, QuadratureError> {
    let region = g.region_bounds_3d(c, varphi);
    if region.is_empty() || !model.lambda(c).is_finite() {
        return Ok(0.0);
    }
    quad.integrate(
        |phi| phi.sin() * model.radial_integral(c, 3, region.r_min(phi), region.r_max(phi)),
        region.phi_min,
        region.phi_max,
    )
    .map(|r| r.value)
}

/// Per-reflection 3-D mass by nested quadrature over azimuth and inclination.
pub fn mass3d_numeric(g: &Geometry3D, model: &ChannelModel) -> Result<MassBreakdown> {
    let quad = mass_quadrature();
    let per_c = (0..=model.max_reflections())
        .map(|c| {
            quad.try_integrate(|varphi| fixed_azimuth_mass_with(g, model, c, varphi, &quad), 0.0, 2.0 * PI)
                .map(|r| (c, r.value))
                .map_err(|source| Error::MassTerm { reflections: c, source })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MassBreakdown::new(per_c, MassMethod::Quadrature))
}

/// Per-reflection 3-D mass from the expanded closed form, using the on-axis
/// escape angle for every azimuth.
pub fn mass3d_closed_form(g: &Geometry3D, model: &ChannelModel) -> MassBreakdown {
    let theta = (g.gap_radius / g.depth()).atan();
    if theta > EXPANSION_ANGLE_LIMIT {
        log::warn!("escape angle {theta:.3} rad exceeds the expansion range");
    }
    let m = model.radial_exponent();
    let per_c = (0..=model.max_reflections())
        .map(|c| (c, closed_form_term_3d(c, g.w, g.depth(), theta, model.lambda(c), m)))
        .collect();
    MassBreakdown::new(per_c, MassMethod::ClosedForm)
}

/// `∫_a^theta phi^2 sin(phi) dphi`.
fn weighted_square(a: f64, theta: f64) -> f64 {
    let antiderivative = |p: f64| -(p * p - 2.0) * p.cos() + 2.0 * p * p.sin();
    antiderivative(theta) - antiderivative(a)
}

/// Closed-form 3-D mass of region `c`, including the full azimuthal turn.
///
/// Same expansions as in the plane: the outer bound about `phi = 0`, the inner
/// bound of reflected regions about `phi = theta / 2`, each integrated against
/// `sin(phi)` exactly.
pub(crate) fn closed_form_term_3d(c: usize, w: f64, depth: f64, theta: f64, lambda: f64, m: f64) -> f64 {
    if !lambda.is_finite() || theta <= 0.0 {
        return 0.0;
    }
    let s = 3.0 / m;
    let scale = 2.0 * PI * lambda.powf(-s) / m;
    let far = (c as f64 + 1.0) * w + depth;
    let x_far = lambda * far.powf(m);
    let curvature = |x: f64| m / 2.0 * x.powf(s) * (-x).exp();

    if c == 0 {
        let x_near = lambda * depth.powf(m);
        return scale
            * ((1.0 - theta.cos()) * inc_gamma_span(s, x_near, x_far)
                + (curvature(x_far) - curvature(x_near)) * weighted_square(0.0, theta));
    }

    let a = region_bounds_for(c, w, depth, theta).phi_min;
    let half = 0.5 * theta;
    let u = 1.5 * theta;
    let cot = 1.0 / u.tan();
    let x_mid = lambda * (2.0 * (c as f64 * w + depth) * theta.sin() / u.sin()).powf(m);
    let slope = m * x_mid.powf(s) * (-x_mid).exp();
    let bend = 0.5 * ((m * x_mid - 4.0) * cot * cot - 1.0);
    // ∫ (phi - theta/2)^k sin(phi) dphi over [a, theta] for k = 1, 2.
    let first = -half * theta.cos() + (a - half) * a.cos() + theta.sin() - a.sin();
    let second = -(half * half - 2.0) * theta.cos()
        + ((a - half).powi(2) - 2.0) * a.cos()
        + theta * theta.sin()
        + (theta - 2.0 * a) * a.sin();

    scale
        * ((a.cos() - theta.cos()) * inc_gamma_span(s, x_mid, x_far)
            + curvature(x_far) * weighted_square(a, theta)
            + slope * cot * first
            + slope * bend * second)
}
