//! Two-component spatial birth-and-death dynamics: a BDLP population coupled
//! to a Glauber environment evolving on a faster time scale, with exact
//! finite-volume oracles, the correlation-function hierarchy, a priori bound
//! envelopes and Monte Carlo simulation.

pub mod admissibility;
pub mod analysis;
pub mod combinatorics;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod hierarchy;
pub mod lyapunov;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{Geometry, Point};
pub use kernel::{Kernel, KernelShape};
pub use params::{ModelParams, ModelSpec};
pub use real::{ExtendedReal, TimeScale};
