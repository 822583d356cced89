pub mod channel;
pub mod error;
pub mod escape3d;
pub mod geometry2d;
pub mod mass2d;
pub mod montecarlo;
pub mod region;
pub mod specfun;
pub mod transport;

pub use error::{Error, Result};
