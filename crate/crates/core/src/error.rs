use thiserror::Error;

use crate::specfun::QuadratureError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the domain of the operation (negative distance, NaN input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    /// Quadrature failed for one reflection order of a mass decomposition.
    #[error("quadrature failed for c = {reflections}: {source}")]
    MassTerm {
        reflections: usize,
        #[source]
        source: QuadratureError,
    },

    #[error(
        "exponential fit did not converge after {iterations} iterations \
         (sse = {sse:.3e}, nu = {nu}, mu = {mu})"
    )]
    Fit {
        iterations: usize,
        sse: f64,
        nu: f64,
        mu: f64,
    },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
