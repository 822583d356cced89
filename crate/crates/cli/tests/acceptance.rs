//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};

use keyhole::channel::{ChannelModel, ChannelParams};
use keyhole::escape3d::Geometry3D;
use keyhole::geometry2d::{area_ratio_first_reflection, Geometry2D, Side};
use keyhole::mass2d::{exterior_isolation_prob, internal_isolation_bridge_term, internal_isolation_first_term, mass_numeric, ClusterInputs};
use keyhole::montecarlo::shoot;
use keyhole::specfun::{fit_exponential_approx, FitMode};
use keyhole::transport::{TransportCase, TransportGeometry};
use keyhole_cli::{csv_bytes, load_preset, preset_names, run_experiment, ExperimentConfig, PointGeometry, Row};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analytic_only(name: &str) -> ExperimentConfig {
    let mut cfg = load_preset(name).unwrap();
    if let Some(mc) = cfg.mc.as_mut() {
        mc.enabled = false;
    }
    cfg
}

fn rows(cfg: &ExperimentConfig) -> Vec<Row> {
    let rows = run_experiment(cfg).unwrap();
    for r in &rows {
        assert_eq!(r.status, "ok", "{} at {}", cfg.name, r.value);
    }
    rows
}

fn escape_geometry(cfg: &ExperimentConfig, value: f64) -> Geometry2D {
    match cfg.geometry_at(value).unwrap() {
        PointGeometry::Escape2D(g) => g,
        other => panic!("expected a 2-D escape geometry, got {other:?}"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn escape_angle() -> Outcome {
    let cfg = load_preset("fig4").unwrap();
    let theta = escape_geometry(&cfg, cfg.sweep.values[0]).theta(Side::Left);
    check((theta - 0.0749).abs() <= 1e-4, format!("theta = {theta:.6}"))
}

fn marcum_fit() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in [2.0, 4.0, 8.0] {
        worst = worst.max(fit_exponential_approx(k, FitMode::Free).unwrap().sup_error);
    }
    let zero = fit_exponential_approx(0.0, FitMode::Free).unwrap();
    let (mu_err, scale_err) = ((zero.mu - 2.0).abs(), (zero.nu.exp() - 0.5).abs());
    check(
        worst <= 0.05 && mu_err <= 1e-6 && scale_err <= 1e-6,
        format!("worst sup error {worst:.4}; K=0: |mu-2| = {mu_err:.1e}, |e^nu-0.5| = {scale_err:.1e}"),
    )
}

fn closed_form_2d() -> Outcome {
    let mut worst = (0.0, "", 0.0);
    for name in ["fig4", "fig5", "fig6", "fig7"] {
        for r in rows(&analytic_only(name)) {
            let e = rel(r.closed.unwrap().total, r.quadrature.unwrap().total);
            if e > worst.0 {
                worst = (e, name, r.value);
            }
        }
    }
    check(worst.0 <= 0.05, format!("worst {:.2}% ({} at {})", 100.0 * worst.0, worst.1, worst.2))
}

fn mc_agreement(name: &str) -> Outcome {
    let cfg = load_preset(name).unwrap();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for r in rows(&cfg) {
        let mc = r.mc.unwrap();
        let analytic = r.isolation_analytic.unwrap();
        let allowed = 0.02f64.max(3.0 * mc.std_err);
        worst = worst.max((mc.p_hat - analytic).abs() / allowed);
        if !mc.agrees_with(analytic, 0.02, 3.0) {
            failures.push(format!("{}: {} vs {}", r.value, mc.p_hat, analytic));
        }
    }
    check(
        failures.is_empty(),
        format!("{} trials per point, worst |diff|/allowed = {worst:.3} {failures:?}", cfg.mc.unwrap().trials),
    )
}

/// The traced count is the first count for which shooting finds a ray.
fn unfolding_oracle() -> Outcome {
    let cfg = load_preset("fig4").unwrap();
    let g = escape_geometry(&cfg, cfg.sweep.values[0]);
    let c_max = cfg.channel.max_reflections;
    let reach = (c_max as f64 + 1.0) * g.w + g.depth();
    let span = [g.x0 - reach * g.theta(Side::Left).tan(), g.x0 + reach * g.theta(Side::Right).tan()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut reachable, mut worst_len, mut mismatches) = (0, 0.0f64, Vec::new());
    for _ in 0..10_000 {
        let p = [rng.random_range(span[0]..span[1]), rng.random_range(0.0..g.w)];
        let classified = g.classify_point(p, c_max).unwrap();
        let traced = (0..=c_max).find_map(|c| shoot(&g, p, c).unwrap().map(|s| (c, s.length)));
        match (classified, traced) {
            (None, None) => {}
            (Some(pc), Some((c, len))) if pc.reflections == c => {
                reachable += 1;
                worst_len = worst_len.max((pc.distance - len).abs());
            }
            (a, b) => mismatches.push(format!("{p:?}: {a:?} vs {b:?}")),
        }
    }
    check(
        mismatches.is_empty() && worst_len <= 1e-9,
        format!("{reachable} reachable of 10000, worst length error {worst_len:.1e}, mismatches {mismatches:?}"),
    )
}

fn truncation() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in rows(&analytic_only("fig6")) {
        worst = worst.max(r.quadrature.unwrap().tail_fraction(3));
    }
    check(worst < 0.01, format!("largest share of c >= 3 is {:.3}%", 100.0 * worst))
}

fn gap_decay() -> Outcome {
    let cfg = analytic_only("fig7");
    let pts: Vec<(f64, f64)> = rows(&cfg).iter().map(|r| (r.value, r.isolation_analytic.unwrap().ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    let range = (pts[0].0, pts[pts.len() - 1].0);
    check(
        r2 > 0.99 && slope < 0.0 && range == (0.1, 0.5),
        format!("slope {slope:.3}, R^2 {r2:.6} over eps in [{}, {}]", range.0, range.1),
    )
}

fn three_dimensional() -> Outcome {
    let cfg = load_preset("fig9").unwrap();
    let mut worst: f64 = 0.0;
    let mut mc_ok = true;
    let mut mc_worst: f64 = 0.0;
    for r in rows(&cfg) {
        worst = worst.max(rel(r.closed.unwrap().total, r.quadrature.unwrap().total));
        let mc = r.mc.unwrap();
        let analytic = r.isolation_analytic.unwrap();
        mc_ok &= mc.agrees_with(analytic, 0.02, 3.0);
        mc_worst = mc_worst.max((mc.p_hat - analytic).abs() / 0.02f64.max(3.0 * mc.std_err));
    }
    let volume = Geometry3D::centered(20.0, 100.0, 0.1, -1e-12).unwrap().volume_ratio_first_reflection();
    let area = area_ratio_first_reflection(20.0, 1e-12);
    let limits = (volume - 7.0).abs() < 1e-9 && (area - 3.0).abs() < 1e-9;
    let additive = ((volume - 1.0) - 6.0).abs() < 1e-9 && ((area - 1.0) - 2.0).abs() < 1e-9;
    check(
        worst <= 0.10 && mc_ok && limits && additive,
        format!(
            "closed form worst {:.2}%, MC worst |diff|/allowed {mc_worst:.3}, volume ratio {volume:.9}, area ratio {area:.9}",
            100.0 * worst
        ),
    )
}

fn arb_transport(case: TransportCase) -> impl Strategy<Value = (TransportGeometry, [f64; 4])> {
    (2.0f64..30.0, 0.05f64..2.0, 0.05f64..2.0, -3.0f64..5.0, 0.2f64..5.0, proptest::array::uniform4(0.0f64..1.0)).prop_map(
        move |(w, tx_len, rx_len, shift, depth, u)| {
            let tx = [50.0, 50.0 + tx_len];
            let rx = match case {
                TransportCase::Opposite => [50.0 + shift, 50.0 + shift + rx_len],
                TransportCase::SameSide => [tx[1] + shift.abs() + 0.01, tx[1] + shift.abs() + 0.01 + rx_len],
            };
            let g = TransportGeometry {
                w,
                length: 100.0,
                case,
                tx_gap: tx,
                rx_gap: rx,
                x0: tx[0] + u[0] * tx_len,
                y0: -depth,
                x1: rx[0] + u[1] * rx_len,
                y1: match case {
                    TransportCase::Opposite => w + 0.1 + 3.0 * u[2],
                    TransportCase::SameSide => -0.1 - 3.0 * u[2],
                },
            };
            (g, u)
        },
    )
}

fn transport() -> Outcome {
    let cfg = analytic_only("fig13");
    let mut notes = Vec::new();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for r in rows(&cfg) {
        let q = r.quadrature.as_ref().unwrap();
        let decreasing = q.per_c.windows(2).all(|p| p[1].1 < p[0].1);
        if !decreasing {
            ok = false;
            notes.push(format!("w = {}: {:?}", r.value, q.per_c));
        }
        worst = worst.max(rel(r.closed.as_ref().unwrap().total, q.total));
    }
    ok &= worst <= 0.05;

    let mut runner = TestRunner::new(PropConfig {
        cases: 512,
        failure_persistence: None,
        ..PropConfig::default()
    });
    for (case, parity) in [(TransportCase::Opposite, 0), (TransportCase::SameSide, 1)] {
        let result = runner.run(&arb_transport(case), |(g, u)| {
            prop_assume!(g.validate().is_ok());
            for c in 0..12 {
                if c % 2 != parity {
                    prop_assert!(g.region(c, Side::Left).is_empty() && g.region(c, Side::Right).is_empty());
                }
            }
            // Nodes drawn anywhere in their default rectangles.
            let p0 = g.default_tx_region().point(u[0], u[3]);
            let p1 = g.default_rx_region().point(u[1], u[2]);
            for (a, b) in [([g.x0, g.y0], [g.x1, g.y1]), (p0, p1)] {
                if let Some(path) = g.link_path(a, b, 11) {
                    prop_assert_eq!(path.reflections % 2, parity);
                }
            }
            if g.los_blocked() {
                prop_assert!(g.min_reflections(11).is_none_or(|c| c >= 2));
                prop_assert!(g.link_path([g.x0, g.y0], [g.x1, g.y1], 11).is_none_or(|p| p.reflections >= 2));
            }
            Ok(())
        });
        if let Err(e) = result {
            ok = false;
            notes.push(format!("{case:?} parity: {e}"));
        }
    }

    // A receiving gap far behind the node cannot be seen directly.
    let blocked = TransportGeometry {
        w: 10.0,
        length: 100.0,
        case: TransportCase::Opposite,
        tx_gap: [40.0, 40.3],
        rx_gap: [35.0, 35.3],
        x0: 40.15,
        y0: -2.0,
        x1: 35.15,
        y1: 12.0,
    };
    let c_min = blocked.min_reflections(6);
    ok &= blocked.los_blocked() && c_min.is_some_and(|c| c >= 2);
    check(
        ok,
        format!("expansion worst {:.2}%, blocked example c_min {c_min:?} {notes:?}", 100.0 * worst),
    )
}

fn determinism() -> Outcome {
    let run_in = |threads: usize, cfg: &ExperimentConfig| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| csv_bytes(cfg, &run_experiment(cfg).unwrap()).unwrap())
    };
    let mut differing = Vec::new();
    let mut count = 0;
    for name in preset_names() {
        let cfg = load_preset(name).unwrap();
        let one = run_in(1, &cfg);
        if run_in(4, &cfg) != one || run_in(4, &cfg) != one {
            differing.push(name);
        }
        count += 1;
    }
    check(differing.is_empty(), format!("{count} presets at 1 and 4 threads, differing: {differing:?}"))
}

fn appendix_terms() -> Outcome {
    let cfg = load_preset("fig4").unwrap();
    let fit = fit_exponential_approx(cfg.channel.k, FitMode::Free).unwrap();
    let g = escape_geometry(&cfg, cfg.sweep.values[0]);
    let inputs = ClusterInputs::from_density(cfg.rho.unwrap(), g.area()).unwrap();
    let model_at = |alpha: f64| ChannelModel::with_fit(ChannelParams { alpha, ..cfg.channel }, fit).unwrap();
    let first = internal_isolation_first_term(&g, &model_at(cfg.sweep.values[0]), &inputs).unwrap();
    let closed_err = rel(first.closed_form, first.direct_quadrature);
    let mut smallest_ratio = f64::INFINITY;
    for &alpha in &cfg.sweep.values {
        let model = model_at(alpha);
        let exterior = exterior_isolation_prob(mass_numeric(&g, &model).unwrap().total, &inputs).unwrap();
        let bridge = internal_isolation_bridge_term(&g, &model, &inputs).unwrap().quadrature;
        let largest = first.direct_quadrature.max(bridge);
        smallest_ratio = smallest_ratio.min(exterior / largest);
    }
    check(
        closed_err <= 0.10 && smallest_ratio >= 10.0,
        format!(
            "closed form {:.4e} vs quadrature {:.4e} ({:.1}% off); exterior / internal >= {smallest_ratio:.3e}",
            first.closed_form,
            first.direct_quadrature,
            100.0 * closed_err
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("escape angle at the reference gap", escape_angle),
        ("Marcum approximation fits", marcum_fit),
        ("2-D closed form vs quadrature", closed_form_2d),
        ("2-D escape analytic vs Monte Carlo", || mc_agreement("fig4")),
        ("unfolding vs explicit ray tracing", unfolding_oracle),
        ("three or more reflections negligible", truncation),
        ("isolation decays exponentially in gap length", gap_decay),
        ("3-D closed form, Monte Carlo and volume ratios", three_dimensional),
        ("transport ordering, expansion, parity and blocked line of sight", transport),
        ("byte-identical CSV across thread counts", determinism),
        ("internal isolation terms", appendix_terms),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
