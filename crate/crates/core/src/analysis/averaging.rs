use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{evolve_grid, gibbs_mean_density, Distribution, Generator, LatticeModel, Layout, Variant};
use crate::params::ModelParams;
use crate::real::TimeScale;
use crate::sim::{run_replicas, InitialState, RunOptions, Simulator, Sort, TrajectoryStats, Window};

/// A functional of the `+` configuration compared between the joint and the
/// averaged evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// Expected number of `+` particles.
    TotalPlus,
    /// Expected `+` count in a window.
    Window { window: Window },
    /// Probability that all listed sites carry a `+` particle, i.e. `⟨KG, μ⟩`
    /// for the indicator `G` of that finite set.
    Occupation { sites: Vec<usize> },
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::TotalPlus => "total_plus".into(),
            Observable::Window { window: Window::Sites { sites, .. } } => format!("window_sites_{sites:?}"),
            Observable::Window { window: Window::Box { lo, hi, .. } } => format!("window_box_{lo:?}_{hi:?}"),
            Observable::Occupation { sites } => format!("occupation_{sites:?}"),
        }
    }

    fn on_law(&self, d: &Distribution) -> Result<f64> {
        match self {
            Observable::TotalPlus => Ok(d.mean_plus_count()),
            Observable::Window { window: Window::Sites { sites, sort: Sort::Plus } } => {
                let mask = site_mask(sites, d.n_sites)?;
                Ok(d.expect(|p, _| (p & mask).count_ones() as f64))
            }
            Observable::Occupation { sites } => {
                let mask = site_mask(sites, d.n_sites)?;
                Ok(d.expect(|p, _| if p & mask == mask { 1.0 } else { 0.0 }))
            }
            Observable::Window { .. } => Err(Error::Unsupported("oracle observables need a + site window".into())),
        }
    }
}

fn site_mask(sites: &[usize], n: usize) -> Result<u32> {
    sites.iter().try_fold(0u32, |m, &s| {
        if s < n {
            Ok(m | 1 << s)
        } else {
            Err(Error::InvalidParameter(format!("site {s} outside the lattice")))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AveragingMode {
    /// Exact transient laws of the lattice chains.
    Oracle,
    /// Replica means. `rho` defaults to the lattice Gibbs density, or to `z`
    /// on a torus without environment interaction.
    Simulation {
        replicas: usize,
        seed: u64,
        #[serde(default)]
        rho: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingRow {
    pub epsilon: TimeScale,
    pub observable: String,
    pub sup_error: f64,
    pub t_at_sup: f64,
    /// Standard error of the difference at `t_at_sup` (zero in oracle mode).
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingCurve {
    pub epsilon: TimeScale,
    pub observable: String,
    pub t: f64,
    pub joint: f64,
    pub averaged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub rho: f64,
    pub rows: Vec<AveragingRow>,
    pub curves: Vec<AveragingCurve>,
}

impl AveragingReport {
    /// Sup errors of one observable in the order of the epsilon list.
    pub fn errors(&self, observable: &Observable) -> Vec<f64> {
        let label = observable.label();
        self.rows.iter().filter(|r| r.observable == label).map(|r| r.sup_error).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "observable", "sup_error", "t_at_sup", "stderr"])?;
        for r in &self.rows {
            w.write_record([
                r.epsilon.to_string(),
                r.observable.clone(),
                r.sup_error.to_string(),
                r.t_at_sup.to_string(),
                r.stderr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long-format curves: one row per epsilon, observable and time.
    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "observable", "t", "joint", "averaged"])?;
        for c in &self.curves {
            w.write_record([
                c.epsilon.to_string(),
                c.observable.clone(),
                c.t.to_string(),
                c.joint.to_string(),
                c.averaged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each `ε`, the sup over the grid of `|⟨F, μ_t^ε⟩ − ⟨F, μ̄_t⟩|`, where
/// `μ̄` starts from the `+` marginal of the initial law.
pub fn averaging_error(
    params: &ModelParams,
    epsilons: &[TimeScale],
    t_grid: &[f64],
    observables: &[Observable],
    initial: &InitialState,
    mode: &AveragingMode,
) -> Result<AveragingReport> {
    if t_grid.is_empty() || epsilons.is_empty() || observables.is_empty() {
        return Err(Error::InvalidParameter("need a time grid, epsilons and observables".into()));
    }
    let lattice = params.geometry.is_lattice().then(|| LatticeModel::new(params.clone())).transpose()?;
    match mode {
        AveragingMode::Oracle => {
            let model = lattice.ok_or_else(|| Error::Unsupported("oracle mode needs a lattice geometry".into()))?;
            let rho = gibbs_mean_density(&model)?;
            let mu0 = initial.lattice_law(model.n_sites, Layout::Joint)?;
            let avg_gen = Generator::new(&model, Variant::Averaged { rho })?;
            let avg = evolve_grid(&avg_gen, &mu0.plus_marginal(), t_grid)?;
            let mut series = Vec::new();
            for &eps in epsilons {
                let gen = Generator::new(&model, Variant::Joint { epsilon: eps })?;
                let joint = evolve_grid(&gen, &mu0, t_grid)?;
                for obs in observables {
                    let j = joint.iter().map(|d| obs.on_law(d)).collect::<Result<Vec<_>>>()?;
                    let a = avg.iter().map(|d| obs.on_law(d)).collect::<Result<Vec<_>>>()?;
                    series.push((eps, obs.label(), j, a, vec![0.0; t_grid.len()]));
                }
            }
            Ok(assemble(rho, t_grid, series))
        }
        AveragingMode::Simulation { replicas, seed, rho } => {
            let rho = match (rho, &lattice) {
                (Some(r), _) => *r,
                (None, Some(model)) => gibbs_mean_density(model)?,
                (None, None) if params.psi.is_zero() => params.z,
                (None, None) => {
                    return Err(Error::Unsupported("continuum averaging with interacting environment needs rho".into()))
                }
            };
            let windows: Vec<Window> = observables
                .iter()
                .map(|o| match o {
                    Observable::TotalPlus => Ok(None),
                    Observable::Window { window } => Ok(Some(window.clone())),
                    Observable::Occupation { .. } => {
                        Err(Error::Unsupported("occupation observables are oracle-only".into()))
                    }
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let opts = RunOptions { windows, ..Default::default() };
            let run = |variant: Variant| -> Result<TrajectoryStats> {
                let sim = Simulator::new(params, variant)?;
                Ok(run_replicas(&sim, initial, t_grid, *replicas, *seed, &opts)?.stats)
            };
            let extract = |s: &TrajectoryStats| -> Vec<(Vec<f64>, Vec<f64>)> {
                let n = s.replicas as f64;
                let mut w = 0;
                observables
                    .iter()
                    .map(|o| match o {
                        Observable::TotalPlus => (s.mean_plus.clone(), s.var_plus.iter().map(|v| v / n).collect()),
                        _ => {
                            w += 1;
                            (s.window_means[w - 1].clone(), vec![f64::NAN; s.t_grid.len()])
                        }
                    })
                    .collect()
            };
            let avg = extract(&run(Variant::Averaged { rho })?);
            let mut series = Vec::new();
            for &eps in epsilons {
                let joint = extract(&run(Variant::Joint { epsilon: eps })?);
                for ((obs, (j, vj)), (a, va)) in observables.iter().zip(joint).zip(&avg) {
                    let var = vj.iter().zip(va).map(|(x, y)| x + y).collect();
                    series.push((eps, obs.label(), j, a.clone(), var));
                }
            }
            Ok(assemble(rho, t_grid, series))
        }
    }
}

type Series = (TimeScale, String, Vec<f64>, Vec<f64>, Vec<f64>);

fn assemble(rho: f64, t_grid: &[f64], series: Vec<Series>) -> AveragingReport {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (epsilon, observable, j, a, var) in series {
        let mut best = (0.0, t_grid[0], var[0]);
        for i in 0..t_grid.len() {
            let e = (j[i] - a[i]).abs();
            if e > best.0 {
                best = (e, t_grid[i], var[i]);
            }
            curves.push(AveragingCurve { epsilon, observable: observable.clone(), t: t_grid[i], joint: j[i], averaged: a[i] });
        }
        rows.push(AveragingRow { epsilon, observable, sup_error: best.0, t_at_sup: best.1, stderr: best.2.sqrt() });
    }
    AveragingReport { rho, rows, curves }
}
