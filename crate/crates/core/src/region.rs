//! Polar description of a reflection region: an inclination range measured
//! from the wall normal through the gap, and radial bounds at each inclination.

use serde::Serialize;

/// Radial bounds `r_min(phi) <= r <= r_max(phi)` of a reflection region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadialBounds {
    /// Direct rays: between the wall with the gap and the opposite wall,
    /// `near / cos(phi) <= r <= far / cos(phi)`.
    Direct { near: f64, far: f64 },
    /// Rays reflected `c >= 1` times: beyond the image of the cone edge,
    /// `apex / sin(theta + phi) <= r <= far / cos(phi)`.
    Reflected { apex: f64, theta: f64, far: f64 },
    /// Rays leaving through an aperture in a parallel plane:
    /// `near / cos(phi) <= r <= lateral / sin(phi)`, unbounded at `phi = 0`.
    Aperture { near: f64, lateral: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionRegion {
    pub reflections: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub radial: RadialBounds,
}

impl ReflectionRegion {
    pub fn is_empty(&self) -> bool {
        !(self.phi_max > self.phi_min)
    }

    pub fn r_min(&self, phi: f64) -> f64 {
        match self.radial {
            RadialBounds::Direct { near, .. } | RadialBounds::Aperture { near, .. } => near / phi.cos(),
            RadialBounds::Reflected { apex, theta, .. } => apex / (theta + phi).sin(),
        }
    }

    pub fn r_max(&self, phi: f64) -> f64 {
        match self.radial {
            RadialBounds::Direct { far, .. } | RadialBounds::Reflected { far, .. } => far / phi.cos(),
            RadialBounds::Aperture { lateral, .. } => {
                if phi <= 0.0 {
                    f64::INFINITY
                } else {
                    lateral / phi.sin()
                }
            }
        }
    }

    /// Whether polar coordinates `(r, phi)` fall inside the closed region.
    pub fn contains(&self, r: f64, phi: f64) -> bool {
        const SLACK: f64 = 1e-12;
        phi >= self.phi_min - SLACK
            && phi <= self.phi_max + SLACK
            && r >= self.r_min(phi) * (1.0 - SLACK)
            && r <= self.r_max(phi) * (1.0 + SLACK)
    }
}
