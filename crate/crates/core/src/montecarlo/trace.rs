//! Explicit specular ray tracing between the two walls of the slab.
//!
//! Nothing here unfolds: the ray is followed wall to wall and its vertical
//! direction flipped at each bounce. That makes it an independent check on
//! the mirrored-copy construction used everywhere else.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::escape3d::Geometry3D;
use crate::geometry2d::{Geometry2D, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RayExit {
    /// Hit the gap wall from outside, away from the gap.
    Blocked,
    /// Started outside and never reaches the gap wall.
    Away,
    /// Left the slab back out through the gap.
    ThroughGap,
    /// Crossed the lateral end of the domain.
    Lateral,
    /// Stopped at the wall that would have been reflection `max + 1`.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<const D: usize> {
    pub start: [f64; D],
    pub end: [f64; D],
    /// Reflections completed before this segment.
    pub reflections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayPath<const D: usize> {
    pub segments: Vec<Segment<D>>,
    pub reflections: usize,
    pub length: f64,
    pub truncated: bool,
    pub exit: RayExit,
}

impl<const D: usize> RayPath<D> {
    /// Point at arc length `s` along the path, with the reflections made so far.
    pub fn point_at(&self, s: f64) -> Option<([f64; D], usize)> {
        let mut walked = 0.0;
        for seg in &self.segments {
            let len = dist(&seg.start, &seg.end);
            if s <= walked + len {
                let f = if len > 0.0 { (s - walked) / len } else { 0.0 };
                return Some((lerp(&seg.start, &seg.end, f), seg.reflections));
            }
            walked += len;
        }
        None
    }
}

fn dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lerp<const D: usize>(a: &[f64; D], b: &[f64; D], f: f64) -> [f64; D] {
    let mut p = *a;
    for i in 0..D {
        p[i] += f * (b[i] - a[i]);
    }
    p
}

fn advance<const D: usize>(p: &[f64; D], d: &[f64; D], t: f64) -> [f64; D] {
    let mut q = *p;
    for i in 0..D {
        q[i] += t * d[i];
    }
    q
}

/// Traces in a slab `0 <= p[D-1] <= w` over `[0, length]^(D-1)`, with the
/// gap in the lower wall given by `in_gap`.
fn trace_slab<const D: usize>(
    origin: [f64; D],
    direction: [f64; D],
    w: f64,
    length: f64,
    in_gap: impl Fn(&[f64; D]) -> bool,
    max_reflections: usize,
) -> Result<RayPath<D>> {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) || origin.iter().any(|v| !v.is_finite()) {
        return Err(domain("ray needs a finite origin and a non-zero direction"));
    }
    let z = D - 1;
    let mut d = direction.map(|v| v / norm);
    if origin[z] > w {
        return Err(domain("ray origin lies above the slab"));
    }
    let mut path = RayPath {
        segments: Vec::new(),
        reflections: 0,
        length: 0.0,
        truncated: false,
        exit: RayExit::Away,
    };
    let mut p = origin;
    let push = |path: &mut RayPath<D>, from: [f64; D], to: [f64; D]| {
        path.length += dist(&from, &to);
        path.segments.push(Segment {
            start: from,
            end: to,
            reflections: path.reflections,
        });
    };

    if p[z] < 0.0 {
        if d[z] <= 0.0 {
            return Ok(path);
        }
        let mut hit = advance(&p, &d, -p[z] / d[z]);
        hit[z] = 0.0;
        push(&mut path, p, hit);
        if !in_gap(&hit) {
            path.exit = RayExit::Blocked;
            return Ok(path);
        }
        p = hit;
    }

    loop {
        // Distance to the lateral end of the domain.
        let lateral = (0..z)
            .filter(|&i| d[i] != 0.0)
            .map(|i| ((if d[i] > 0.0 { length } else { 0.0 }) - p[i]) / d[i])
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let wall = if d[z] > 0.0 {
            (w - p[z]) / d[z]
        } else if d[z] < 0.0 {
            -p[z] / d[z]
        } else {
            f64::INFINITY
        };
        if lateral < wall {
            push(&mut path, p, advance(&p, &d, lateral));
            path.exit = RayExit::Lateral;
            return Ok(path);
        }
        let mut hit = advance(&p, &d, wall);
        let upper = d[z] > 0.0;
        hit[z] = if upper { w } else { 0.0 };
        push(&mut path, p, hit);
        if !upper && in_gap(&hit) {
            path.exit = RayExit::ThroughGap;
            return Ok(path);
        }
        if path.reflections == max_reflections {
            path.truncated = true;
            path.exit = RayExit::Truncated;
            return Ok(path);
        }
        path.reflections += 1;
        d[z] = -d[z];
        p = hit;
    }
}

/// Traces a ray through the 2-D escape geometry.
pub fn trace_ray(g: &Geometry2D, origin: [f64; 2], direction: [f64; 2], max_reflections: usize) -> Result<RayPath<2>> {
    let (lo, hi) = (g.gap_left(), g.gap_right());
    trace_slab(origin, direction, g.w, g.length, |p| (lo..=hi).contains(&p[0]), max_reflections)
}

/// Traces a ray through the 3-D escape geometry.
pub fn trace_ray_3d(g: &Geometry3D, origin: [f64; 3], direction: [f64; 3], max_reflections: usize) -> Result<RayPath<3>> {
    let [cx, cy] = g.gap_center;
    let r = g.gap_radius;
    trace_slab(origin, direction, g.w, g.length, |p| (p[0] - cx).hypot(p[1] - cy) <= r, max_reflections)
}

/// A ray from the exterior node found by shooting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    pub phi: f64,
    pub length: f64,
}

/// Where the traced ray at inclination `phi` towards `side` crosses height
/// `y` during the leg after `c` reflections: `(horizontal offset, arc length)`.
fn leg_crossing(g: &Geometry2D, phi: f64, side: Side, c: usize, y: f64) -> Result<Option<(f64, f64)>> {
    let sx = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let path = trace_ray(g, [g.x0, g.y0], [sx * phi.sin(), phi.cos()], c)?;
    let mut walked = 0.0;
    for seg in &path.segments {
        let len = dist(&seg.start, &seg.end);
        let (y0, y1) = (seg.start[1], seg.end[1]);
        if seg.reflections == c && y0 >= 0.0 && y1 >= 0.0 && (y0.min(y1)..=y0.max(y1)).contains(&y) && y1 != y0 {
            let f = (y - y0) / (y1 - y0);
            let x = seg.start[0] + f * (seg.end[0] - seg.start[0]);
            return Ok(Some(((x - g.x0) * sx, walked + f * len)));
        }
        walked += len;
    }
    Ok(None)
}

/// Finds by bisection the escape-cone ray that reaches `target` after
/// exactly `c` reflections, or `None` if every such ray falls short.
pub fn shoot(g: &Geometry2D, target: [f64; 2], c: usize) -> Result<Option<Shot>> {
    let dx = target[0] - g.x0;
    let side = if dx < 0.0 { Side::Left } else { Side::Right };
    let want = dx.abs();
    let theta = g.theta(side);
    let offset = |phi: f64| -> Result<(f64, f64)> {
        Ok(leg_crossing(g, phi, side, c, target[1])?.unwrap_or((f64::INFINITY, f64::NAN)))
    };
    if offset(theta)?.0 < want {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, theta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if offset(mid)?.0 < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, length) = offset(hi)?;
    Ok(Some(Shot { phi: hi, length }))
}
