//! Experiment configuration: one JSON document per sweep.

use std::fmt;
use std::path::Path;

use keyhole::channel::ChannelParams;
use keyhole::escape3d::Geometry3D;
use keyhole::geometry2d::{Geometry2D, Sides};
use keyhole::montecarlo::EscapeEvent;
use keyhole::transport::{TransportCase, TransportGeometry};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Escape2d,
    Escape3d,
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Eps,
    Y0,
    Z0,
    W,
    GapRadius,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Eps => "eps",
            SweepParam::Y0 => "y0",
            SweepParam::Z0 => "z0",
            SweepParam::W => "w",
            SweepParam::GapRadius => "gap_radius",
        }
    }
}

/// Geometry fields; which ones are required depends on the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub w: f64,
    pub length: f64,
    /// Gap length (2-D escape and transport).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Depth of node 0 below the gap wall (2-D escape and transport).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<TransportCase>,
    /// Left end of the transmitting gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_gap_start: Option<f64>,
    /// Left end of the receiving gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_gap_start: Option<f64>,
    /// Distance of node 1 beyond its wall; defaults to `|y0|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub event: EscapeEvent,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub scenario: ScenarioKind,
    pub geometry: GeometryBlock,
    pub channel: ChannelParams,
    /// Interior density; escape scenarios only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub sides: Sides,
}

/// Config problem with the line it was found on, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source, line, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Node and domain geometry of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointGeometry {
    Escape2D(Geometry2D),
    Escape3D(Geometry3D),
    Transport(TransportGeometry),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates `text`; `source` names it in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            source: source.into(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|(keys, message)| ConfigError {
            source: source.into(),
            line: key_line(text, keys),
            message,
        })?;
        Ok(cfg)
    }

    /// Checks everything serde cannot; errors carry the key path they refer to.
    fn validate(&self) -> Result<(), (&'static [&'static str], String)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err((
                &["schema_version"],
                format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let values = &self.sweep.values;
        if values.is_empty() {
            return Err((&["sweep", "values"], "sweep grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err((&["sweep", "values"], "sweep values must be finite".into()));
        }
        let up = values.windows(2).all(|p| p[1] > p[0]);
        let down = values.windows(2).all(|p| p[1] < p[0]);
        if !(up || down) {
            return Err((&["sweep", "values"], "sweep values must be strictly monotone".into()));
        }
        let allowed: &[SweepParam] = match self.scenario {
            ScenarioKind::Escape2d | ScenarioKind::Transport => &[SweepParam::Alpha, SweepParam::Eps, SweepParam::Y0, SweepParam::W],
            ScenarioKind::Escape3d => &[SweepParam::Alpha, SweepParam::GapRadius, SweepParam::Z0, SweepParam::W],
        };
        if !allowed.contains(&self.sweep.param) {
            return Err((
                &["sweep", "param"],
                format!("cannot sweep {} in a {:?} scenario", self.sweep.param.name(), self.scenario),
            ));
        }
        self.check_geometry_fields()?;
        match (self.scenario, self.rho) {
            (ScenarioKind::Transport, Some(_)) => return Err((&["rho"], "transport runs take no density".into())),
            (ScenarioKind::Escape2d | ScenarioKind::Escape3d, None) => return Err((&["scenario"], "escape runs need rho".into())),
            (_, Some(rho)) if !(rho.is_finite() && rho >= 0.0) => {
                return Err((&["rho"], format!("rho must be finite and >= 0, got {rho}")))
            }
            _ => {}
        }
        if let Some(mc) = &self.mc {
            if mc.trials == 0 {
                return Err((&["mc", "trials"], "at least one trial is required".into()));
            }
            if self.scenario == ScenarioKind::Escape3d && mc.event == EscapeEvent::Joint && mc.enabled {
                return Err((&["mc", "event"], "3-D runs support only the marginal event".into()));
            }
        }
        for &v in values {
            let p = self.channel_at(v);
            p.validate().map_err(|e| (&["channel"][..], e.to_string()))?;
            self.geometry_at(v).map_err(|e| (&["geometry"][..], e))?;
        }
        Ok(())
    }

    fn check_geometry_fields(&self) -> Result<(), (&'static [&'static str], String)> {
        let g = &self.geometry;
        let present = [
            ("eps", g.eps.is_some()),
            ("y0", g.y0.is_some()),
            ("z0", g.z0.is_some()),
            ("gap_radius", g.gap_radius.is_some()),
            ("case", g.case.is_some()),
            ("tx_gap_start", g.tx_gap_start.is_some()),
            ("rx_gap_start", g.rx_gap_start.is_some()),
            ("rx_offset", g.rx_offset.is_some()),
        ];
        let (required, optional): (&[&str], &[&str]) = match self.scenario {
            ScenarioKind::Escape2d => (&["eps", "y0"], &[]),
            ScenarioKind::Escape3d => (&["z0", "gap_radius"], &[]),
            ScenarioKind::Transport => (&["eps", "y0", "case", "tx_gap_start", "rx_gap_start"], &["rx_offset"]),
        };
        for (name, set) in present {
            if required.contains(&name) && !set {
                return Err((&["geometry"], format!("geometry.{name} is required for {:?}", self.scenario)));
            }
            if set && !required.contains(&name) && !optional.contains(&name) {
                return Err((&["geometry"], format!("geometry.{name} does not apply to {:?}", self.scenario)));
            }
        }
        Ok(())
    }

    pub fn channel_at(&self, value: f64) -> ChannelParams {
        let mut p = self.channel;
        if self.sweep.param == SweepParam::Alpha {
            p.alpha = value;
        }
        p
    }

    /// Geometry with the swept parameter set to `value`.
    pub fn geometry_at(&self, value: f64) -> Result<PointGeometry, String> {
        let mut g = self.geometry;
        match self.sweep.param {
            SweepParam::Alpha => {}
            SweepParam::Eps => g.eps = Some(value),
            SweepParam::Y0 => g.y0 = Some(value),
            SweepParam::Z0 => g.z0 = Some(value),
            SweepParam::W => g.w = value,
            SweepParam::GapRadius => g.gap_radius = Some(value),
        }
        let need = |v: Option<f64>| v.expect("presence checked");
        let built = match self.scenario {
            ScenarioKind::Escape2d => Geometry2D::centered(g.w, g.length, need(g.eps), need(g.y0), self.sides).map(PointGeometry::Escape2D),
            ScenarioKind::Escape3d => Geometry3D::centered(g.w, g.length, need(g.gap_radius), need(g.z0)).map(PointGeometry::Escape3D),
            ScenarioKind::Transport => {
                let (eps, y0) = (need(g.eps), need(g.y0));
                let case = g.case.expect("presence checked");
                let tx = [need(g.tx_gap_start), need(g.tx_gap_start) + eps];
                let rx = [need(g.rx_gap_start), need(g.rx_gap_start) + eps];
                let offset = g.rx_offset.unwrap_or(y0.abs());
                let tg = TransportGeometry {
                    w: g.w,
                    length: g.length,
                    case,
                    tx_gap: tx,
                    rx_gap: rx,
                    x0: 0.5 * (tx[0] + tx[1]),
                    y0,
                    x1: 0.5 * (rx[0] + rx[1]),
                    y1: match case {
                        TransportCase::Opposite => g.w + offset,
                        TransportCase::SameSide => -offset,
                    },
                };
                tg.validate().map(|_| PointGeometry::Transport(tg))
            }
        };
        built.map_err(|e| format!("at {} = {value}: {e}", self.sweep.param.name()))
    }
}

/// Line of the first occurrence of the nested key path `keys` in `text`.
fn key_line(text: &str, keys: &[&str]) -> Option<usize> {
    let mut at = 0;
    for key in keys {
        let quoted = format!("\"{key}\"");
        at += text[at..].find(&quoted)?;
    }
    Some(text[..at].matches('\n').count() + 1)
}
