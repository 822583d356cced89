//! Special functions and numerical kernels.

mod fit;
mod gamma;
mod marcum;
mod quadrature;

pub use fit::{fit_exponential_approx, ApproxFit, FitMode, FIT_GRID_POINTS, FIT_TAIL_LEVEL};
pub use gamma::{erf, erfc, gamma, gamma_p, gamma_q, ln_gamma, lower_inc_gamma};
pub use marcum::marcum_q1;
pub use quadrature::{integrate_adaptive, QuadResult, Quadrature, QuadratureError};

pub(crate) use gamma::inc_gamma_span;
#[cfg(test)]
pub(crate) use gamma::upper_inc_gamma_unchecked;
pub(crate) use marcum::marcum_q1_unchecked;
