//! Finite configurations and the harmonic-analysis toolkit on finite site
//! spaces: K-transform, its Möbius inverse, Lebesgue–Poisson sums and the
//! combinatorial integration-by-parts identity.

mod config;
mod transform;

pub use config::{cross_energy, relative_energy, FiniteConfig};
pub use transform::{
    ibp_check, ibp_sides, k_transform, k_transform_config, lp_integral, lp_integral_single, mobius_inverse,
    subsets, SetFunction, MAX_LP_SITES,
};
