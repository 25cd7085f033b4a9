//! Exact event-driven simulation of the joint, environment-only and averaged
//! dynamics on a continuum torus or a finite lattice.

mod engine;
mod replicas;
mod sampler;

pub use engine::{SimState, Simulator, Snapshot, StepOutcome};
pub use replicas::{
    empirical_law, run_replicas, sample_initial, InitialState, RunOptions, RunOutput, Sort, TrajectoryStats, Window,
};
pub use sampler::DisplacementSampler;
pub(crate) use engine::uniform_point;
