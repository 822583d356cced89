use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::table::LinkSampler;
use super::{trial_rng, McConfig, McEstimate, Scenario};
use crate::error::{Error, Result};

/// Trials whose shortest admissible path used `reflections` bounces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stratum {
    pub reflections: usize,
    /// Trials with a path of this count.
    pub pairs: u64,
    /// Of those, trials whose link came up.
    pub links: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportEstimate {
    /// Probability that the two nodes link.
    pub estimate: McEstimate,
    /// One entry per reflection count up to the channel maximum.
    pub strata: Vec<Stratum>,
}

/// Estimates the link probability between the two transport nodes, either
/// at their fixed positions or drawn uniformly from the configured regions.
pub fn run_transport(cfg: &McConfig) -> Result<TransportEstimate> {
    cfg.validate()?;
    let Scenario::Transport(setup) = &cfg.scenario else {
        return Err(Error::Config("transport run needs a transport scenario".into()));
    };
    let tg = &setup.geometry;
    let sampler = LinkSampler::new(&cfg.model);
    let c_max = cfg.model.max_reflections();
    let tally = |mut acc: Vec<[u64; 2]>, (c, up): (usize, bool)| {
        acc[c][0] += 1;
        acc[c][1] += u64::from(up);
        acc
    };
    let counts = (0..cfg.trials)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = trial_rng(cfg.seed, t);
            let (p0, p1) = match &setup.regions {
                Some([v0, v1]) => (v0.point(rng.random(), rng.random()), v1.point(rng.random(), rng.random())),
                None => ([tg.x0, tg.y0], [tg.x1, tg.y1]),
            };
            let path = tg.link_path(p0, p1, c_max)?;
            Some((path.reflections, sampler.link(path.distance, path.reflections, rng.random())))
        })
        .fold(|| vec![[0u64; 2]; c_max + 1], tally)
        .reduce(
            || vec![[0u64; 2]; c_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                }
                a
            },
        );
    let strata: Vec<Stratum> = counts
        .iter()
        .enumerate()
        .map(|(c, &[pairs, links])| Stratum {
            reflections: c,
            pairs,
            links,
        })
        .collect();
    let links = strata.iter().map(|s| s.links).sum();
    Ok(TransportEstimate {
        estimate: McEstimate::new(links, cfg.trials, cfg.seed),
        strata,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{EscapeEvent, Population, TransportSetup};
    use super::*;
    use crate::channel::{ChannelModel, ChannelParams};
    use crate::geometry2d::Side;
    use crate::transport::{
        averaged_connect_prob, pair_link_prob, transport_mass, LinkProbability, NodeRegion, TransportCase, TransportGeometry,
        TransportMethod,
    };

    fn model(beta: f64) -> ChannelModel {
        let p = ChannelParams {
            k: 4.0,
            beta,
            eta: 2.0,
            alpha: 0.85,
            max_reflections: 4,
        };
        ChannelModel::new(p).unwrap()
    }

    fn geometry() -> TransportGeometry {
        TransportGeometry {
            w: 4.0,
            length: 100.0,
            case: TransportCase::Opposite,
            tx_gap: [40.0, 42.0],
            rx_gap: [43.0, 45.0],
            x0: 41.0,
            y0: -1.0,
            x1: 44.0,
            y1: 5.0,
        }
    }

    fn config(setup: TransportSetup, md: ChannelModel, trials: u64) -> McConfig {
        McConfig {
            trials,
            seed: 9,
            population: Population::Count(0),
            scenario: Scenario::Transport(setup),
            model: md,
            event: EscapeEvent::Marginal,
        }
    }

    #[test]
    fn fixed_nodes_match_the_pair_probability() {
        let g = geometry();
        let md = model(0.03);
        let exact = pair_link_prob(&g, &md, [g.x0, g.y0], [g.x1, g.y1], LinkProbability::Exact);
        assert!(exact > 0.1 && exact < 0.9, "{exact}");
        let est = run_transport(&config(TransportSetup { geometry: g, regions: None }, md, 4000)).unwrap();
        assert!(est.estimate.agrees_with(exact, 0.0, 4.0), "{est:?} vs {exact}");
        // A fixed pair always has the same path, so one stratum holds every trial.
        let used: Vec<_> = est.strata.iter().filter(|s| s.pairs > 0).collect();
        assert_eq!(used.len(), 1);
        assert_eq!(used[0].pairs, 4000);
    }

    #[test]
    fn sampled_nodes_match_the_averaged_probability() {
        let g = geometry();
        let md = model(0.03);
        let regions = [g.default_tx_region(), g.default_rx_region()];
        let avg = averaged_connect_prob(&g, &md, &regions[0], &regions[1], LinkProbability::Exact, 1 << 16).unwrap();
        let est = run_transport(&config(TransportSetup { geometry: g, regions: Some(regions) }, md, 6000)).unwrap();
        assert!(est.estimate.agrees_with(avg, 0.01, 4.0), "{est:?} vs {avg}");
        let total: u64 = est.strata.iter().map(|s| s.links).sum();
        assert_eq!(total, est.estimate.event_count);
    }

    #[test]
    fn seeded_runs_repeat_across_thread_counts() {
        let g = geometry();
        let regions = Some([g.default_tx_region(), g.default_rx_region()]);
        let cfg = config(TransportSetup { geometry: g, regions }, model(0.03), 500);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_transport(&cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn nearly_coincident_direct_pair_always_links() {
        let g = TransportGeometry {
            w: 1e-3,
            tx_gap: [40.0, 45.0],
            rx_gap: [40.0, 45.0],
            x0: 42.0,
            y0: -1e-3,
            x1: 42.0,
            y1: 2e-3,
            ..geometry()
        };
        let est = run_transport(&config(TransportSetup { geometry: g, regions: None }, model(1e-3), 200)).unwrap();
        assert_eq!(est.estimate.p_hat, 1.0);
    }

    #[test]
    fn lossless_walls_off_and_no_line_of_sight() {
        let g = TransportGeometry {
            w: 10.0,
            tx_gap: [40.0, 40.3],
            rx_gap: [20.0, 20.3],
            x0: 40.15,
            y0: -2.0,
            x1: 20.15,
            y1: 12.0,
            ..geometry()
        };
        assert!(g.los_blocked());
        let md = ChannelModel::new(ChannelParams {
            alpha: 0.0,
            ..model(1e-3).params
        })
        .unwrap();
        let regions = Some([g.default_tx_region(), g.default_rx_region()]);
        let est = run_transport(&config(TransportSetup { geometry: g, regions }, md, 500)).unwrap();
        assert_eq!(est.estimate.event_count, 0);
    }

    /// Strata by minimal reflection count rank like the analytic per-count masses.
    #[test]
    fn strata_follow_the_mass_ordering() {
        let md = ChannelModel::new(ChannelParams {
            beta: 1e-3,
            max_reflections: 6,
            ..model(1e-3).params
        })
        .unwrap();
        for w in [10.0, 15.0, 20.0] {
            let g = TransportGeometry {
                w,
                tx_gap: [15.0, 15.3],
                rx_gap: [14.5, 14.8],
                x0: 15.15,
                y0: -2.0,
                x1: 14.65,
                y1: w + 2.0,
                ..geometry()
            };
            let analytic = transport_mass(&g, &md, TransportMethod::Quadrature).unwrap();
            let v0 = NodeRegion { x: g.tx_gap, y: [-2.01, -2.0] };
            let v1 = NodeRegion { x: [5.0, 25.0], y: [w, w + 15.0] };
            let est = run_transport(&config(TransportSetup { geometry: g, regions: Some([v0, v1]) }, md, 200_000)).unwrap();
            // Counts whose analytic share is too small to show up in the sample are skipped.
            let links: Vec<(usize, u64)> = est
                .strata
                .iter()
                .filter(|s| analytic.contribution(s.reflections) > 1e-3 * analytic.total)
                .map(|s| (s.reflections, s.links))
                .collect();
            assert!(!links.is_empty());
            assert!(links.windows(2).all(|p| p[1].1 < p[0].1), "w {w}: {links:?}");
            for s in est.strata.iter().filter(|s| s.pairs > 0) {
                assert!(g.parity_allows(s.reflections));
                assert!([Side::Left, Side::Right].iter().any(|&side| !g.region(s.reflections, side).is_empty()));
            }
        }
    }

    #[test]
    fn escape_scenarios_are_rejected() {
        let mut cfg = config(TransportSetup { geometry: geometry(), regions: None }, model(1e-3), 10);
        cfg.scenario = Scenario::Escape2D(crate::geometry2d::Geometry2D::centered(20.0, 100.0, 0.3, -2.0, Default::default()).unwrap());
        assert!(run_transport(&cfg).is_err());
    }
}
