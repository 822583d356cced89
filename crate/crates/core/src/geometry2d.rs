//! Escape-problem geometry in two dimensions.
//!
//! The domain is the strip `0 <= y <= w`, `0 <= x <= L`. A gap of length `eps`
//! is cut into the lower wall and the exterior node sits below it at
//! `(x0, y0)`, `y0 < 0`. Rays entering through the gap bounce between the two
//! horizontal walls. Reflecting the domain instead of the ray turns every
//! path into a straight line through a stack of mirrored copies: copy `c`
//! occupies `c w <= Y <= (c + 1) w` and a point `(x, y)` has the image height
//! `Y_c(y) = c w + y` for even `c` and `(c + 1) w - y` for odd `c`.
//!
//! A ray leaving the node at inclination `phi` from the vertical passes
//! through the gap iff `phi` is at most the escape angle `theta` of that side,
//! so a point needs `c` reflections iff copy `c` is the lowest one whose image
//! lies inside the escape cone.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::region::{RadialBounds, ReflectionRegion};

/// Which horizontal direction a ray leaves the node in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Towards decreasing `x`.
    Left,
    /// Towards increasing `x`.
    Right,
}

/// Which sides of the node contribute to connectivity masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    /// Only the part of the domain to the left of the node.
    LeftOnly,
    #[default]
    Both,
}

impl Sides {
    pub fn iter(self) -> impl Iterator<Item = Side> {
        let list: &'static [Side] = match self {
            Sides::LeftOnly => &[Side::Left],
            Sides::Both => &[Side::Left, Side::Right],
        };
        list.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry2D {
    pub w: f64,
    pub length: f64,
    pub eps: f64,
    pub gap_center_x: f64,
    pub x0: f64,
    pub y0: f64,
    #[serde(default)]
    pub sides: Sides,
}

/// Reflection count and unfolded path length of an interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointClass {
    pub reflections: usize,
    pub distance: f64,
    pub side: Side,
}

impl Geometry2D {
    pub fn new(w: f64, length: f64, eps: f64, gap_center_x: f64, x0: f64, y0: f64, sides: Sides) -> Result<Self> {
        let g = Self {
            w,
            length,
            eps,
            gap_center_x,
            x0,
            y0,
            sides,
        };
        g.validate()?;
        Ok(g)
    }

    /// Gap in the middle of the lower wall, node directly below its center.
    pub fn centered(w: f64, length: f64, eps: f64, y0: f64, sides: Sides) -> Result<Self> {
        Self::new(w, length, eps, 0.5 * length, 0.5 * length, y0, sides)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Geometry(msg));
        for (name, v) in [
            ("w", self.w),
            ("length", self.length),
            ("eps", self.eps),
            ("gap_center_x", self.gap_center_x),
            ("x0", self.x0),
            ("y0", self.y0),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite, got {v}"));
            }
        }
        if self.w <= 0.0 || self.length <= 0.0 {
            return fail(format!("domain must have positive size, got w = {}, L = {}", self.w, self.length));
        }
        if !(self.eps > 0.0 && self.eps < self.w) {
            return fail(format!("gap length must satisfy 0 < eps < w, got eps = {}", self.eps));
        }
        if self.y0 >= 0.0 {
            return fail(format!("exterior node must lie below the wall (y0 < 0), got {}", self.y0));
        }
        if self.gap_left() < 0.0 || self.gap_right() > self.length {
            return fail("gap must lie within the lower wall".into());
        }
        if (self.x0 - self.gap_center_x).abs() > 0.5 * self.eps * (1.0 + 1e-12) {
            return fail(format!(
                "node x0 = {} must lie within the gap span [{}, {}]",
                self.x0,
                self.gap_left(),
                self.gap_right()
            ));
        }
        Ok(())
    }

    pub fn gap_left(&self) -> f64 {
        self.gap_center_x - 0.5 * self.eps
    }

    pub fn gap_right(&self) -> f64 {
        self.gap_center_x + 0.5 * self.eps
    }

    /// Distance of the node below the wall, `|y0|`.
    pub fn depth(&self) -> f64 {
        -self.y0
    }

    pub fn area(&self) -> f64 {
        self.w * self.length
    }

    /// Escape angle towards `side`: the inclination of the ray grazing that gap edge.
    pub fn theta(&self, side: Side) -> f64 {
        let reach = match side {
            Side::Left => self.x0 - self.gap_left(),
            Side::Right => self.gap_right() - self.x0,
        };
        (reach.max(0.0) / self.depth()).atan()
    }

    /// Height of the image of interior height `y` in mirror copy `c`.
    pub fn image_height(&self, c: usize, y: f64) -> f64 {
        let cw = c as f64 * self.w;
        if c % 2 == 0 {
            cw + y
        } else {
            cw + self.w - y
        }
    }

    /// Horizontal position where a ray at the escape angle meets the wall for the `i`-th time.
    pub fn impact_point(&self, i: usize, side: Side) -> f64 {
        let run = (i as f64 * self.w + self.depth()) * self.theta(side).tan();
        match side {
            Side::Left => self.x0 - run,
            Side::Right => self.x0 + run,
        }
    }

    pub fn region_bounds(&self, c: usize) -> ReflectionRegion {
        self.region_bounds_side(c, Side::Left)
    }

    pub fn region_bounds_side(&self, c: usize, side: Side) -> ReflectionRegion {
        region_bounds_for(c, self.w, self.depth(), self.theta(side))
    }

    /// Vertices (counter-clockwise) of region `c` on `side`: a trapezoid for
    /// `c = 0` and a triangle of area `w^2 tan(theta)` otherwise.
    pub fn cartesian_bounds(&self, c: usize, side: Side) -> Vec<[f64; 2]> {
        let t = self.theta(side).tan();
        let (w, d) = (self.w, self.depth());
        // Horizontal offsets from the node, measured towards `side`.
        let local: Vec<[f64; 2]> = if c == 0 {
            vec![[0.0, 0.0], [0.0, w], [(w + d) * t, w], [d * t, 0.0]]
        } else {
            let cw = c as f64 * w;
            let apex = (cw + d) * t;
            let inner = (cw - w + d) * t;
            let outer = (cw + w + d) * t;
            if c % 2 == 1 {
                vec![[inner, 0.0], [apex, w], [outer, 0.0]]
            } else {
                vec![[apex, 0.0], [inner, w], [outer, w]]
            }
        };
        let mut pts: Vec<[f64; 2]> = local
            .into_iter()
            .map(|[u, y]| match side {
                Side::Left => [self.x0 - u, y],
                Side::Right => [self.x0 + u, y],
            })
            .collect();
        if polygon_signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        pts
    }

    /// Horizontal distances `(near, far)` from the node, towards `side`,
    /// spanned by region `c` at height `y`.
    pub fn offset_range_at(&self, c: usize, side: Side, y: f64) -> (f64, f64) {
        let t = self.theta(side).tan();
        let d = self.depth();
        if c == 0 {
            (0.0, (y + d) * t)
        } else {
            let s = if c % 2 == 0 { y } else { self.w - y };
            let cw = c as f64 * self.w;
            ((cw - s + d) * t, (cw + s + d) * t)
        }
    }

    /// Horizontal extent of region `c` on `side` at height `y`, as `(lo, hi)`.
    pub fn x_range_at(&self, c: usize, side: Side, y: f64) -> (f64, f64) {
        let (near, far) = self.offset_range_at(c, side, y);
        match side {
            Side::Left => (self.x0 - far, self.x0 - near),
            Side::Right => (self.x0 + near, self.x0 + far),
        }
    }

    /// Smallest reflection count `c <= max_reflections` whose image of `p`
    /// lies in the escape cone, with the unfolded distance to that image.
    /// Boundary points go to the lower count.
    pub fn classify_point(&self, p: [f64; 2], max_reflections: usize) -> Result<Option<PointClass>> {
        let [x, y] = p;
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || x > self.length || y < 0.0 || y > self.w {
            return Err(domain(format!("point ({x}, {y}) is outside the domain")));
        }
        Ok(self.classify_unchecked(x, y, max_reflections))
    }

    pub(crate) fn classify_unchecked(&self, x: f64, y: f64, max_reflections: usize) -> Option<PointClass> {
        let dx = self.x0 - x;
        let side = if dx >= 0.0 { Side::Left } else { Side::Right };
        if side == Side::Right && self.sides == Sides::LeftOnly {
            return None;
        }
        let run = dx.abs();
        let t = self.theta(side).tan();
        let d = self.depth();
        (0..=max_reflections).find_map(|c| {
            let rise = self.image_height(c, y) + d;
            (run <= rise * t).then(|| PointClass {
                reflections: c,
                distance: run.hypot(rise),
                side,
            })
        })
    }

    /// Ratio of the first two region areas in cumulative form,
    /// `(a0 + a1) / a0 = 1 + 2 / (1 + 2|y0|/w)`.
    pub fn area_ratio_first_reflection(&self) -> f64 {
        area_ratio_first_reflection(self.w, self.depth())
    }
}

pub fn area_ratio_first_reflection(w: f64, depth: f64) -> f64 {
    1.0 + 2.0 / (1.0 + 2.0 * depth / w)
}

/// Region `c` for a slab of width `w` seen from a node `depth` below it with escape angle `theta`.
pub(crate) fn region_bounds_for(c: usize, w: f64, depth: f64, theta: f64) -> ReflectionRegion {
    let far = (c as f64 + 1.0) * w + depth;
    if c == 0 {
        return ReflectionRegion {
            reflections: 0,
            phi_min: 0.0,
            phi_max: theta,
            radial: RadialBounds::Direct { near: depth, far },
        };
    }
    let cw = c as f64 * w;
    let phi_min = ((cw - w + depth) * theta.tan() / far).atan();
    ReflectionRegion {
        reflections: c,
        phi_min,
        phi_max: theta,
        radial: RadialBounds::Reflected {
            apex: 2.0 * (cw + depth) * theta.sin(),
            theta,
            far,
        },
    }
}

pub fn polygon_signed_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let [x1, y1] = pts[i];
            let [x2, y2] = pts[(i + 1) % n];
            x1 * y2 - x2 * y1
        })
        .sum::<f64>()
}

/// Membership in a closed convex polygon given counter-clockwise.
pub fn convex_polygon_contains(pts: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let [x1, y1] = pts[i];
        let [x2, y2] = pts[(i + 1) % n];
        let cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1);
        let edge = (x2 - x1).hypot(y2 - y1);
        cross >= -tol * edge
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig4() -> Geometry2D {
        Geometry2D::centered(20.0, 100.0, 0.3, -2.0, Sides::Both).unwrap()
    }

    /// Polar coordinates of the image of `p` in copy `c`, seen from the node.
    fn polar_image(g: &Geometry2D, c: usize, p: [f64; 2]) -> (f64, f64) {
        let run = (g.x0 - p[0]).abs();
        let rise = g.image_height(c, p[1]) + g.depth();
        (run.hypot(rise), (run / rise).atan())
    }

    #[test]
    fn escape_angle_of_fig4() {
        assert_abs_diff_eq!(fig4().theta(Side::Left), 0.0749, epsilon = 1e-4);
        let wide = Geometry2D::centered(20.0, 100.0, 4.0, -2.0, Sides::Both).unwrap();
        assert_abs_diff_eq!(wide.theta(Side::Left), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        let tiny = Geometry2D::centered(20.0, 100.0, 1e-9, -2.0, Sides::Both).unwrap();
        assert!(tiny.theta(Side::Left) < 1e-9);
    }

    #[test]
    fn off_center_node_has_asymmetric_angles() {
        let g = Geometry2D::new(20.0, 100.0, 0.3, 50.0, 49.9, -2.0, Sides::Both).unwrap();
        assert_abs_diff_eq!(g.theta(Side::Left), (0.05f64 / 2.0).atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.theta(Side::Right), (0.25f64 / 2.0).atan(), epsilon = 1e-12);
    }

    #[test]
    fn invalid_geometries() {
        assert!(Geometry2D::centered(20.0, 100.0, 0.3, 2.0, Sides::Both).is_err());
        assert!(Geometry2D::centered(20.0, 100.0, 25.0, -2.0, Sides::Both).is_err());
        assert!(Geometry2D::new(20.0, 100.0, 0.3, 50.0, 51.0, -2.0, Sides::Both).is_err());
        assert!(Geometry2D::centered(f64::NAN, 100.0, 0.3, -2.0, Sides::Both).is_err());
    }

    #[test]
    fn region_bounds_examples() {
        let g = fig4();
        let r0 = g.region_bounds(0);
        assert_eq!(r0.phi_min, 0.0);
        assert_abs_diff_eq!(r0.r_min(0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r0.r_max(0.0), 22.0, epsilon = 1e-15);

        let theta = g.theta(Side::Left);
        let r1 = g.region_bounds(1);
        assert_abs_diff_eq!(r1.phi_min, (2.0 * theta.tan() / 42.0).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(r1.phi_min, 0.003_575, epsilon = 5e-6);
        assert_abs_diff_eq!(r1.r_min(theta), 22.06, epsilon = 5e-3);
        assert_abs_diff_eq!(r1.r_min(theta), 22.0 / theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(r1.r_max(theta), 42.12, epsilon = 5e-3);
        // The two bounds meet at the lower end of the angular range.
        assert_abs_diff_eq!(r1.r_min(r1.phi_min), r1.r_max(r1.phi_min), epsilon = 1e-10);
    }

    #[test]
    fn impact_point_example() {
        let g = Geometry2D::centered(20.0, 30.0, 0.3, -2.0, Sides::Both).unwrap();
        assert_eq!(g.x0, 15.0);
        assert_abs_diff_eq!(g.impact_point(1, Side::Left), 13.35, epsilon = 1e-12);
        let tri = g.cartesian_bounds(1, Side::Left);
        assert!(tri.iter().any(|v| (v[0] - 13.35).abs() < 1e-12 && v[1] == 20.0));
    }

    #[test]
    fn direct_region_contains_point_above_gap() {
        let g = fig4();
        let poly = g.cartesian_bounds(0, Side::Left);
        assert!(convex_polygon_contains(&poly, [g.x0, 10.0], 1e-12));
        let hit = g.classify_point([g.x0, 10.0], 6).unwrap().unwrap();
        assert_eq!(hit.reflections, 0);
        assert_abs_diff_eq!(hit.distance, 12.0, epsilon = 1e-12);
    }

    #[test]
    fn unreachable_just_past_the_last_region() {
        let g = fig4();
        let c_max = 3;
        // Just beyond the outermost corner of region c_max.
        let [x, y] = g
            .cartesian_bounds(c_max, Side::Left)
            .into_iter()
            .min_by(|a, b| a[0].total_cmp(&b[0]))
            .unwrap();
        assert!(g.classify_point([x - 1e-6, y], c_max).unwrap().is_none());
        assert!(g.classify_point([x - 1e-6, y], c_max + 2).unwrap().unwrap().reflections > c_max);
        assert!(g.classify_point([x + 1e-6, y], c_max).unwrap().is_some());
    }

    #[test]
    fn classify_rejects_outside_points() {
        let g = fig4();
        assert!(g.classify_point([50.0, -0.1], 6).is_err());
        assert!(g.classify_point([101.0, 5.0], 6).is_err());
    }

    #[test]
    fn left_only_drops_right_half() {
        let g = Geometry2D::centered(20.0, 100.0, 0.3, -2.0, Sides::LeftOnly).unwrap();
        assert!(g.classify_point([50.5, 10.0], 6).unwrap().is_none());
        assert!(g.classify_point([49.5, 10.0], 6).unwrap().is_some());
    }

    #[test]
    fn area_ratio_limits() {
        assert_abs_diff_eq!(area_ratio_first_reflection(20.0, 1e-12), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(area_ratio_first_reflection(20.0, 20.0), 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(area_ratio_first_reflection(20.0, 1e12), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn area_ratio_matches_polygons() {
        for (eps, y0) in [(0.3, -2.0), (1.0, -0.5), (4.0, -7.0)] {
            let g = Geometry2D::centered(20.0, 1000.0, eps, y0, Sides::Both).unwrap();
            let a0 = polygon_signed_area(&g.cartesian_bounds(0, Side::Left));
            let a1 = polygon_signed_area(&g.cartesian_bounds(1, Side::Left));
            assert_abs_diff_eq!((a0 + a1) / a0, g.area_ratio_first_reflection(), epsilon = 1e-9);
            for c in 1..5 {
                let ac = polygon_signed_area(&g.cartesian_bounds(c, Side::Left));
                assert_abs_diff_eq!(ac, 400.0 * g.theta(Side::Left).tan(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn polar_and_cartesian_membership_agree() {
        let g = Geometry2D::new(10.0, 400.0, 2.0, 200.0, 200.4, -1.5, Sides::Both).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let p = [rng.random_range(150.0..250.0), rng.random_range(0.0..10.0)];
            let side = if p[0] <= g.x0 { Side::Left } else { Side::Right };
            for c in 0..6 {
                let (r, phi) = polar_image(&g, c, p);
                let polar = g.region_bounds_side(c, side).contains(r, phi);
                let cart = convex_polygon_contains(&g.cartesian_bounds(c, side), p, 1e-9);
                let (lo, hi) = g.x_range_at(c, side, p[1]);
                let strip = p[0] >= lo - 1e-9 && p[0] <= hi + 1e-9;
                assert_eq!(polar, cart, "c = {c}, p = {p:?}");
                assert_eq!(strip, cart, "c = {c}, p = {p:?}");
            }
        }
    }

    #[test]
    fn regions_tile_the_cone() {
        let g = fig4();
        let c_max = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reach = (c_max as f64 + 1.0) * g.w + g.depth();
        let span = reach * g.theta(Side::Left).tan();
        for _ in 0..10_000 {
            let p = [rng.random_range(g.x0 - span..g.x0 + span), rng.random_range(0.0..g.w)];
            let side = if p[0] <= g.x0 { Side::Left } else { Side::Right };
            let members: Vec<usize> = (0..=c_max)
                .filter(|&c| convex_polygon_contains(&g.cartesian_bounds(c, side), p, -1e-9))
                .collect();
            let class = g.classify_point(p, c_max).unwrap();
            match class {
                Some(pc) => {
                    assert!(members.len() <= 1, "overlap at {p:?}: {members:?}");
                    if let Some(&c) = members.first() {
                        assert_eq!(c, pc.reflections);
                    }
                    assert!(convex_polygon_contains(&g.cartesian_bounds(pc.reflections, side), p, 1e-9));
                }
                None => assert!(members.is_empty()),
            }
        }
    }

    proptest! {
        #[test]
        fn lower_angle_bound_nests(eps in 0.01f64..5.0, depth in 0.1f64..10.0, w in 6.0f64..40.0) {
            let g = Geometry2D::centered(w, 1000.0, eps, -depth, Sides::Both).unwrap();
            let theta = g.theta(Side::Left);
            let mut prev = 0.0;
            for c in 0..10 {
                let phi = g.region_bounds(c).phi_min;
                prop_assert!(phi >= prev && phi <= theta);
                prev = phi;
            }
        }
    }
}
