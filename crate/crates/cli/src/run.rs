//! Executes a sweep and writes its CSV.

use std::io::Write;

use keyhole::channel::ChannelModel;
use keyhole::escape3d::{mass3d_closed_form, mass3d_numeric};
use keyhole::mass2d::{mass_closed_form, mass_numeric, MassBreakdown};
use keyhole::montecarlo::{run_escape_isolation, run_transport, McConfig, McEstimate, Population, Scenario, TransportSetup};
use keyhole::specfun::{fit_exponential_approx, FitMode};
use keyhole::transport::{averaged_connect_prob, transport_mass, LinkProbability, TransportMethod};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, PointGeometry, SCHEMA_VERSION};

/// Quasi-random pairs behind the analytic transport probability.
pub const TRANSPORT_AVERAGE_SAMPLES: usize = 1 << 14;

pub const COLUMNS: [&str; 10] = [
    "sweep_param",
    "value",
    "mass_closed",
    "mass_quadrature",
    "isolation_analytic",
    "mc_p_hat",
    "mc_std_err",
    "trials",
    "seed",
    "status",
];

/// Results at one sweep point. `status` is `ok` or the first error met;
/// whatever was computed before the error is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub value: f64,
    pub closed: Option<MassBreakdown>,
    pub quadrature: Option<MassBreakdown>,
    /// `exp(-rho * mass)` for escape runs, the averaged link probability for transport.
    pub isolation_analytic: Option<f64>,
    pub mc: Option<McEstimate>,
    pub status: String,
}

/// Evaluates every sweep point, in parallel, returning rows in sweep order.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Vec<Row>> {
    let fit = fit_exponential_approx(cfg.channel.k, FitMode::Free)?;
    Ok(cfg
        .sweep
        .values
        .par_iter()
        .map(|&value| {
            let mut row = Row {
                value,
                closed: None,
                quadrature: None,
                isolation_analytic: None,
                mc: None,
                status: "ok".into(),
            };
            if let Err(e) = evaluate(cfg, fit, &mut row) {
                row.status = format!("error: {e}");
            }
            row
        })
        .collect())
}

fn evaluate(cfg: &ExperimentConfig, fit: keyhole::specfun::ApproxFit, row: &mut Row) -> anyhow::Result<()> {
    let model = ChannelModel::with_fit(cfg.channel_at(row.value), fit)?;
    let geometry = cfg.geometry_at(row.value).map_err(anyhow::Error::msg)?;
    let rho = cfg.rho.unwrap_or(0.0);
    let scenario = match geometry {
        PointGeometry::Escape2D(g) => {
            row.closed = Some(mass_closed_form(&g, &model));
            let q = mass_numeric(&g, &model)?;
            row.isolation_analytic = Some((-rho * q.total).exp());
            row.quadrature = Some(q);
            Scenario::Escape2D(g)
        }
        PointGeometry::Escape3D(g) => {
            row.closed = Some(mass3d_closed_form(&g, &model));
            let q = mass3d_numeric(&g, &model)?;
            row.isolation_analytic = Some((-rho * q.total).exp());
            row.quadrature = Some(q);
            Scenario::Escape3D(g)
        }
        PointGeometry::Transport(tg) => {
            row.closed = Some(transport_mass(&tg, &model, TransportMethod::Expansion)?);
            row.quadrature = Some(transport_mass(&tg, &model, TransportMethod::Quadrature)?);
            let regions = [tg.default_tx_region(), tg.default_rx_region()];
            row.isolation_analytic = Some(averaged_connect_prob(
                &tg,
                &model,
                &regions[0],
                &regions[1],
                LinkProbability::Exact,
                TRANSPORT_AVERAGE_SAMPLES,
            )?);
            Scenario::Transport(TransportSetup {
                geometry: tg,
                regions: Some(regions),
            })
        }
    };
    let Some(mc) = cfg.mc.filter(|m| m.enabled) else {
        return Ok(());
    };
    let mc_cfg = McConfig {
        trials: mc.trials,
        seed: mc.seed,
        population: Population::Density(rho),
        scenario,
        model,
        event: mc.event,
    };
    row.mc = Some(match scenario {
        Scenario::Transport(_) => run_transport(&mc_cfg)?.estimate,
        _ => run_escape_isolation(&mc_cfg)?,
    });
    Ok(())
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the schema line, the header and one record per row.
pub fn write_csv<W: Write>(cfg: &ExperimentConfig, rows: &[Row], out: W) -> anyhow::Result<()> {
    let mut out = out;
    writeln!(out, "# keyhole sweep schema_version={SCHEMA_VERSION} name={}", cfg.name)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let num = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for r in rows {
        w.write_record([
            cfg.sweep.param.name().to_string(),
            format_number(r.value),
            num(r.closed.as_ref().map(|m| m.total)),
            num(r.quadrature.as_ref().map(|m| m.total)),
            num(r.isolation_analytic),
            num(r.mc.map(|m| m.p_hat)),
            num(r.mc.map(|m| m.std_err)),
            r.mc.map(|m| m.trials.to_string()).unwrap_or_default(),
            r.mc.map(|m| m.seed.to_string()).unwrap_or_default(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_bytes(cfg: &ExperimentConfig, rows: &[Row]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(cfg, rows, &mut buf)?;
    Ok(buf)
}
