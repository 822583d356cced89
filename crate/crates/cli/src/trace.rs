//! Ray-trace debugging output.

use keyhole::montecarlo::{trace_ray, trace_ray_3d, RayPath};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, PointGeometry};

/// Traces one ray through the geometry of the config's first sweep point.
///
/// `angle` is the inclination from the wall normal, positive towards `+x`;
/// in 3-D `azimuth` turns the ray about the normal. A missing origin means
/// node 0.
pub fn trace_json(cfg: &ExperimentConfig, origin: Option<&[f64]>, angle: f64, azimuth: f64, max_reflections: usize) -> anyhow::Result<Value> {
    let first = cfg.sweep.values[0];
    match cfg.geometry_at(first).map_err(anyhow::Error::msg)? {
        PointGeometry::Escape2D(g) => {
            let o = match origin {
                None => [g.x0, g.y0],
                Some(&[x, y]) => [x, y],
                Some(_) => anyhow::bail!("a 2-D origin takes two coordinates"),
            };
            let path = trace_ray(&g, o, [angle.sin(), angle.cos()], max_reflections)?;
            Ok(path_json(&path))
        }
        PointGeometry::Escape3D(g) => {
            let o = match origin {
                None => [g.x0, g.y0, g.z0],
                Some(&[x, y, z]) => [x, y, z],
                Some(_) => anyhow::bail!("a 3-D origin takes three coordinates"),
            };
            let d = [angle.sin() * azimuth.cos(), angle.sin() * azimuth.sin(), angle.cos()];
            let path = trace_ray_3d(&g, o, d, max_reflections)?;
            Ok(path_json(&path))
        }
        PointGeometry::Transport(_) => anyhow::bail!("tracing supports escape geometries only"),
    }
}

fn path_json<const D: usize>(path: &RayPath<D>) -> Value {
    let segments: Vec<Value> = path
        .segments
        .iter()
        .map(|s| json!({ "start": s.start.to_vec(), "end": s.end.to_vec(), "reflections": s.reflections }))
        .collect();
    json!({
        "reflections": path.reflections,
        "length": path.length,
        "truncated": path.truncated,
        "exit": path.exit,
        "segments": segments,
    })
}
