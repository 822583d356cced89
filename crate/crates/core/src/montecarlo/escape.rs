use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::table::LinkSampler;
use super::union_find::UnionFind;
use super::{trial_rng, EscapeEvent, McConfig, McEstimate, Scenario};
use crate::error::{Error, Result};
use crate::escape3d::Geometry3D;
use crate::geometry2d::{Geometry2D, Side};

/// Estimates the probability that the exterior node links to no interior
/// node (jointly with a fully connected interior, unless the config asks
/// for the marginal event).
pub fn run_escape_isolation(cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let sampler = LinkSampler::new(&cfg.model);
    let count = match (&cfg.scenario, cfg.event) {
        (Scenario::Escape2D(g), EscapeEvent::Joint) => {
            let n = cfg.population.count(g.area())?;
            count_trials(cfg, |rng| {
                let nodes = place_2d(rng, n, [0.0, g.length], g.w);
                isolated_2d(g, &sampler, &nodes, rng) && interior_connected(&nodes, &sampler, rng, None)
            })
        }
        (Scenario::Escape2D(g), EscapeEvent::Marginal) => {
            let n = cfg.population.count(g.area())?;
            let span = reach_span_2d(g, cfg.model.max_reflections());
            let share = ((span[1] - span[0]) / g.length).min(1.0);
            count_trials(cfg, |rng| {
                let k = binomial(rng, n, share);
                let nodes = place_2d(rng, k, span, g.w);
                isolated_2d(g, &sampler, &nodes, rng)
            })
        }
        (Scenario::Escape3D(g), EscapeEvent::Marginal) => {
            let n = cfg.population.count(g.volume())?;
            let bbox = reach_box_3d(g, cfg.model.max_reflections());
            let share = ((bbox[0][1] - bbox[0][0]) * (bbox[1][1] - bbox[1][0]) / (g.length * g.length)).min(1.0);
            let c_max = cfg.model.max_reflections();
            count_trials(cfg, |rng| {
                let k = binomial(rng, n, share);
                (0..k).all(|_| {
                    let p = [
                        uniform(rng, bbox[0]),
                        uniform(rng, bbox[1]),
                        uniform(rng, [0.0, g.w]),
                    ];
                    match g.classify_unchecked(p, c_max) {
                        Some(pc) => !sampler.link(pc.distance, pc.reflections, rng.random()),
                        None => true,
                    }
                })
            })
        }
        (Scenario::Escape3D(_), EscapeEvent::Joint) => {
            return Err(Error::Config(
                "the joint event is not available in 3-D; use the marginal event".into(),
            ))
        }
        (Scenario::Transport(_), _) => return Err(Error::Config("escape run needs an escape scenario".into())),
    };
    Ok(McEstimate::new(count, cfg.trials, cfg.seed))
}

/// Estimates the probability that node 0 and all interior nodes form one
/// connected component.
pub fn run_full_connectivity(cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let Scenario::Escape2D(g) = &cfg.scenario else {
        return Err(Error::Config("full connectivity runs need a 2-D escape scenario".into()));
    };
    let n = cfg.population.count(g.area())?;
    let sampler = LinkSampler::new(&cfg.model);
    let c_max = cfg.model.max_reflections();
    let count = count_trials(cfg, |rng| {
        let nodes = place_2d(rng, n, [0.0, g.length], g.w);
        // Index 0 is the exterior node, interior node i is i + 1.
        let mut uf = UnionFind::new(n + 1);
        for (i, p) in nodes.iter().enumerate() {
            if let Some(pc) = g.classify_unchecked(p[0], p[1], c_max) {
                if sampler.link(pc.distance, pc.reflections, rng.random()) {
                    uf.union(0, i + 1);
                }
            }
        }
        interior_connected(&nodes, &sampler, rng, Some(uf))
    });
    Ok(McEstimate::new(count, cfg.trials, cfg.seed))
}

fn count_trials<F>(cfg: &McConfig, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| u64::from(trial(&mut trial_rng(cfg.seed, t))))
        .sum()
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

fn binomial(rng: &mut ChaCha8Rng, n: usize, p: f64) -> usize {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n as u64, p).expect("probability in [0, 1]").sample(rng) as usize
}

fn place_2d(rng: &mut ChaCha8Rng, n: usize, span: [f64; 2], w: f64) -> Vec<[f64; 2]> {
    (0..n).map(|_| [uniform(rng, span), uniform(rng, [0.0, w])]).collect()
}

/// Horizontal extent that any region up to `c_max` can reach.
fn reach_span_2d(g: &Geometry2D, c_max: usize) -> [f64; 2] {
    let height = (c_max as f64 + 1.0) * g.w + g.depth();
    let reach = |side: Side| {
        if g.sides.iter().any(|s| s == side) {
            height * g.theta(side).tan()
        } else {
            0.0
        }
    };
    [(g.x0 - reach(Side::Left)).max(0.0), (g.x0 + reach(Side::Right)).min(g.length)]
}

fn reach_box_3d(g: &Geometry3D, c_max: usize) -> [[f64; 2]; 2] {
    let off_axis = (g.x0 - g.gap_center[0]).hypot(g.y0 - g.gap_center[1]);
    let reach = ((c_max as f64 + 1.0) * g.w + g.depth()) * (off_axis + g.gap_radius) / g.depth();
    [
        [(g.x0 - reach).max(0.0), (g.x0 + reach).min(g.length)],
        [(g.y0 - reach).max(0.0), (g.y0 + reach).min(g.length)],
    ]
}

fn isolated_2d(g: &Geometry2D, sampler: &LinkSampler, nodes: &[[f64; 2]], rng: &mut ChaCha8Rng) -> bool {
    let c_max = sampler.max_reflections();
    nodes.iter().all(|p| match g.classify_unchecked(p[0], p[1], c_max) {
        Some(pc) => !sampler.link(pc.distance, pc.reflections, rng.random()),
        None => true,
    })
}

/// Samples direct interior links until the graph is connected or every
/// pair has been drawn. `seeded` carries links already drawn, with the
/// interior nodes at indices `1..`.
fn interior_connected(nodes: &[[f64; 2]], sampler: &LinkSampler, rng: &mut ChaCha8Rng, seeded: Option<UnionFind>) -> bool {
    let (mut uf, shift) = match seeded {
        Some(uf) => (uf, 1),
        None => (UnionFind::new(nodes.len()), 0),
    };
    if uf.components() == 1 {
        return true;
    }
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (a, b) = (nodes[i], nodes[j]);
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            if sampler.link(d, 0, rng.random()) && uf.union(i + shift, j + shift) && uf.components() == 1 {
                return true;
            }
        }
    }
    false
}
