//! Exact master-equation solution of the lattice chain: generators for the
//! joint, environment-only and averaged dynamics, transient laws and their
//! correlation functions.

mod distribution;
mod generator;
mod model;

pub use distribution::{
    correlation_from_distribution, evolve_dense, evolve_exact, evolve_grid, evolve_uniformized, gibbs_density,
    gibbs_distribution, gibbs_mean_density, Distribution, MAX_DENSE_STATES, MAX_GIBBS_SITES,
};
pub use generator::{Generator, Layout, Variant, MAX_EXPLICIT_STATES};
pub use model::{LatticeModel, MAX_ORACLE_SITES};

#[cfg(test)]
pub(crate) use model::fixtures;
pub(crate) use model::bits;
