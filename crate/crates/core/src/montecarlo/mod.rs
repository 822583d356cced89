//! Monte Carlo oracle for the analytic results.
//!
//! Each trial draws node positions, decides every relevant link as a
//! Bernoulli draw with the exact Marcum-Q probability of its shortest
//! admissible path, and records whether the event of interest happened.
//! Trial `t` draws from its own ChaCha stream `(seed, t)`, so an estimate
//! does not depend on how trials are spread over threads.

mod escape;
mod table;
mod trace;
mod transport;
mod union_find;

pub use escape::{run_escape_isolation, run_full_connectivity};
pub use trace::{shoot, trace_ray, trace_ray_3d, RayExit, RayPath, Segment, Shot};
pub use transport::{run_transport, Stratum, TransportEstimate};
pub use union_find::UnionFind;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::escape3d::Geometry3D;
use crate::geometry2d::Geometry2D;
use crate::transport::{NodeRegion, TransportGeometry};

/// Size of the interior population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// Nodes per unit area (volume); the count is `round(rho * V)`.
    Density(f64),
    Count(usize),
}

impl Population {
    pub fn count(self, volume: f64) -> Result<usize> {
        match self {
            Population::Count(n) => Ok(n),
            Population::Density(rho) if rho.is_finite() && rho >= 0.0 => Ok((rho * volume).round() as usize),
            Population::Density(rho) => Err(Error::Config(format!("density must be finite and >= 0, got {rho}"))),
        }
    }
}

/// Which outcome an escape run counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeEvent {
    /// Node 0 links to no interior node while the interior is fully connected.
    #[default]
    Joint,
    /// Node 0 links to no interior node.
    Marginal,
}

/// Placement of the two transport nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportSetup {
    pub geometry: TransportGeometry,
    /// Node positions drawn uniformly from these rectangles; `None` keeps the
    /// geometry's fixed node positions.
    pub regions: Option<[NodeRegion; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Escape2D(Geometry2D),
    Escape3D(Geometry3D),
    Transport(TransportSetup),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// Interior population; ignored for transport.
    pub population: Population,
    pub scenario: Scenario,
    pub model: ChannelModel,
    pub event: EscapeEvent,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        match &self.scenario {
            Scenario::Escape2D(g) => g.validate(),
            Scenario::Escape3D(g) => g.validate(),
            Scenario::Transport(t) => t.geometry.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub event_count: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub std_err: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn new(event_count: u64, trials: u64, seed: u64) -> Self {
        let p_hat = event_count as f64 / trials as f64;
        Self {
            event_count,
            trials,
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            seed,
        }
    }

    /// Whether `value` lies within `max(floor, sigmas * std_err)` of the estimate.
    pub fn agrees_with(&self, value: f64, floor: f64, sigmas: f64) -> bool {
        (self.p_hat - value).abs() <= floor.max(sigmas * self.std_err)
    }
}

pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
