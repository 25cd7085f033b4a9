//! JSON experiment configuration.

use std::path::PathBuf;

use anyhow::{bail, Context};
use bdlp_core::admissibility::AdmissibilityOptions;
use bdlp_core::analysis::{AveragingMode, Observable};
use bdlp_core::envelope::EnvelopeSpec;
use bdlp_core::hierarchy::{Closure, Exclusion, StepControl};
use bdlp_core::oracle::{gibbs_mean_density, LatticeModel, Variant};
use bdlp_core::sim::{InitialState, Window};
use bdlp_core::{KernelShape, ModelParams, ModelSpec, TimeScale};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Check(CheckBlock),
    Simulate(SimulateBlock),
    Oracle(OracleBlock),
    Hierarchy(HierarchyBlock),
    AverageScan(AverageScanBlock),
    Lyapunov(LyapunovBlock),
    Report(ReportBlock),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Check(_) => "check",
            Experiment::Simulate(_) => "simulate",
            Experiment::Oracle(_) => "oracle",
            Experiment::Hierarchy(_) => "hierarchy",
            Experiment::AverageScan(_) => "average-scan",
            Experiment::Lyapunov(_) => "lyapunov",
            Experiment::Report(_) => "report",
        }
    }
}

/// Which generator drives a run; `ε` comes from the model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    #[default]
    Joint,
    EnvironmentOnly,
    /// `rho` defaults to the lattice Gibbs density, or `z` on a torus without
    /// environment interaction.
    Averaged {
        #[serde(default)]
        rho: Option<f64>,
    },
}

impl Dynamics {
    pub fn variant(&self, params: &ModelParams) -> anyhow::Result<Variant> {
        Ok(match self {
            Dynamics::Joint => Variant::Joint { epsilon: params.epsilon },
            Dynamics::EnvironmentOnly => Variant::EnvironmentOnly { epsilon: params.epsilon },
            Dynamics::Averaged { rho: Some(rho) } => Variant::Averaged { rho: *rho },
            Dynamics::Averaged { rho: None } => {
                let rho = if params.geometry.is_lattice() {
                    gibbs_mean_density(&LatticeModel::new(params.clone())?)?
                } else if params.psi.is_zero() {
                    params.z
                } else {
                    bail!("averaged dynamics on a torus with an interacting environment needs an explicit rho");
                };
                Variant::Averaged { rho }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    #[serde(default)]
    pub options: Option<AdmissibilityOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovWeight {
    pub e: KernelShape,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default)]
    pub dynamics: Dynamics,
    pub initial: InitialState,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    #[serde(default)]
    pub event_budget: Option<u64>,
    #[serde(default)]
    pub windows: Vec<Window>,
    /// Radial bin edges for pair-correlation estimates at the last grid time
    /// (continuum only).
    #[serde(default)]
    pub pair_bins: Option<Vec<f64>>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovWeight>,
    /// Lattice only: total variation between the empirical law and the exact
    /// law at each grid time.
    #[serde(default)]
    pub compare_oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default)]
    pub dynamics: Dynamics,
    pub initial: InitialState,
    pub t_grid: Vec<f64>,
    /// Also tabulate correlation functions up to these orders.
    #[serde(default)]
    pub orders: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyBlock {
    #[serde(default)]
    pub dynamics: Dynamics,
    pub initial: InitialState,
    pub t_grid: Vec<f64>,
    pub orders: (usize, usize),
    #[serde(default)]
    pub closure: Closure,
    #[serde(default)]
    pub exclusion: Exclusion,
    #[serde(default)]
    pub step: StepControl,
    #[serde(default)]
    pub envelope: Option<EnvelopeSpec>,
    #[serde(default)]
    pub compare_oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageScanBlock {
    pub epsilon_list: Vec<TimeScale>,
    pub t_grid: Vec<f64>,
    pub observables: Vec<Observable>,
    pub initial: InitialState,
    pub mode: ScanMode,
}

/// Averaging comparison mode; simulation runs use the config seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanMode {
    Oracle,
    Simulation {
        replicas: usize,
        #[serde(default)]
        rho: Option<f64>,
    },
}

impl ScanMode {
    pub fn with_seed(&self, seed: u64) -> AveragingMode {
        match self {
            ScanMode::Oracle => AveragingMode::Oracle,
            ScanMode::Simulation { replicas, rho } => AveragingMode::Simulation { replicas: *replicas, seed, rho: *rho },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovBlock {
    pub weight: LyapunovWeight,
    pub initial: InitialState,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    #[serde(default)]
    pub event_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBlock {
    pub envelope: EnvelopeSpec,
    #[serde(default)]
    pub dynamics: Dynamics,
    pub initial: InitialState,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    #[serde(default)]
    pub averaging: Option<AverageScanBlock>,
}

fn check_grid(t: &[f64]) -> anyhow::Result<()> {
    if t.is_empty() || t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) || t.iter().any(|v| !v.is_finite()) {
        bail!("t_grid must be non-empty, finite, nonnegative and strictly increasing");
    }
    Ok(())
}

fn check_replicas(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        bail!("replicas must be >= 1");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.params()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> anyhow::Result<ModelParams> {
        Ok(self.model.clone().into_params().context("invalid model")?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match &self.experiment {
            Experiment::Check(_) => Ok(()),
            Experiment::Simulate(b) => {
                check_grid(&b.t_grid)?;
                check_replicas(b.replicas)
            }
            Experiment::Oracle(b) => check_grid(&b.t_grid),
            Experiment::Hierarchy(b) => check_grid(&b.t_grid),
            Experiment::AverageScan(b) => check_grid(&b.t_grid),
            Experiment::Lyapunov(b) => {
                check_grid(&b.t_grid)?;
                if b.t_grid[0] != 0.0 {
                    bail!("lyapunov t_grid must start at 0");
                }
                check_replicas(b.replicas)
            }
            Experiment::Report(b) => {
                check_grid(&b.t_grid)?;
                check_replicas(b.replicas)?;
                b.averaging.as_ref().map_or(Ok(()), |a| check_grid(&a.t_grid))
            }
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        crate::artifacts::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#""model": {"m": 1, "g": 0.5, "z": 1, "epsilon": 0.3,
        "a_plus": {"type": "gaussian", "amplitude": 1, "width": 1},
        "a_minus": {"type": "gaussian", "amplitude": 1, "width": 1},
        "b_minus": {"type": "gaussian", "amplitude": 1, "width": 1},
        "geometry": {"type": "torus", "side": 10, "dim": 1}}"#;

    #[test]
    fn parses_simulate_block() {
        let text = format!(
            r#"{{{MODEL}, "seed": 4, "experiment": {{"kind": "simulate",
            "initial": {{"type": "poisson", "z_plus": 1, "z_minus": 1}},
            "t_grid": [0, 1], "replicas": 3}}}}"#
        );
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.experiment.name(), "simulate");
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let top = format!(r#"{{{MODEL}, "bogus": 1, "experiment": {{"kind": "check"}}}}"#);
        assert!(ExperimentConfig::from_json(&top).is_err());
        let inner = format!(
            r#"{{{MODEL}, "experiment": {{"kind": "oracle", "initial": {{"type": "empty"}}, "t_grid": [1], "extra": 2}}}}"#
        );
        assert!(ExperimentConfig::from_json(&inner).is_err());
    }

    #[test]
    fn bad_grid_rejected() {
        let text = format!(
            r#"{{{MODEL}, "experiment": {{"kind": "simulate", "initial": {{"type": "empty"}}, "t_grid": [1, 0.5], "replicas": 3}}}}"#
        );
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn negative_rate_rejected() {
        let text = format!(r#"{{{}, "experiment": {{"kind": "check"}}}}"#, MODEL.replace(r#""m": 1"#, r#""m": -1"#));
        assert!(ExperimentConfig::from_json(&text).is_err());
    }
}
