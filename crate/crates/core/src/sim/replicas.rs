use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::lyapunov::{lyapunov_value, LyapunovSpec};
use crate::oracle::{Distribution, Layout, Variant};
use crate::real::TimeScale;
use crate::rng::{stream, StreamTag};
use crate::sim::uniform_point;
use crate::sim::{SimState, Simulator, Snapshot};

/// Law of the configuration at time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Empty,
    /// Independent Poisson processes with intensities `z_plus`, `z_minus`
    /// (continuum). With `env_burn_in`, the `−` configuration is further
    /// relaxed by the environment dynamics for that long.
    Poisson {
        z_plus: f64,
        z_minus: f64,
        #[serde(default)]
        env_burn_in: Option<f64>,
    },
    /// Deterministic continuum positions.
    Fixed { plus: Vec<Vec<f64>>, minus: Vec<Vec<f64>> },
    /// Deterministic occupied sites.
    Sites { plus: Vec<usize>, minus: Vec<usize> },
    /// Independent site occupation with the given probabilities.
    Bernoulli { p_plus: f64, p_minus: f64 },
    /// An exact lattice law, e.g. from the oracle.
    Law { law: Distribution },
}

impl InitialState {
    /// Exact law of a lattice initial state, projected onto `layout`.
    pub fn lattice_law(&self, n_sites: usize, layout: Layout) -> Result<Distribution> {
        let mask = |v: &[usize]| -> Result<u32> {
            v.iter().try_fold(0u32, |m, &s| {
                if s >= n_sites || m >> s & 1 == 1 {
                    Err(Error::InvalidParameter(format!("site {s} repeated or out of range")))
                } else {
                    Ok(m | 1 << s)
                }
            })
        };
        let joint = match self {
            InitialState::Empty => Distribution::point(n_sites, Layout::Joint, 0, 0)?,
            InitialState::Sites { plus, minus } => Distribution::point(n_sites, Layout::Joint, mask(plus)?, mask(minus)?)?,
            InitialState::Bernoulli { p_plus, p_minus } => {
                Distribution::product_bernoulli(n_sites, Layout::Joint, &vec![*p_plus; n_sites], &vec![*p_minus; n_sites])?
            }
            InitialState::Law { law } if law.n_sites == n_sites && law.layout == layout => return Ok(law.clone()),
            InitialState::Law { law } if law.n_sites == n_sites && law.layout == Layout::Joint => law.clone(),
            InitialState::Law { .. } => {
                return Err(Error::InvalidParameter("initial law does not match the lattice state space".into()))
            }
            _ => return Err(Error::Unsupported("continuum initial states have no lattice law".into())),
        };
        Ok(match layout {
            Layout::Joint => joint,
            Layout::Plus => joint.plus_marginal(),
            Layout::Minus => joint.minus_marginal(),
        })
    }
}

/// Sort selector for window counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sort {
    Plus,
    Minus,
}

/// Observation window for counting particles of one sort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// Axis-aligned box `[lo, hi]` in the fundamental cell.
    Box { lo: Vec<f64>, hi: Vec<f64>, sort: Sort },
    Sites { sites: Vec<usize>, sort: Sort },
}

impl Window {
    pub fn count(&self, snap: &Snapshot) -> usize {
        match (self, snap) {
            (Window::Box { lo, hi, sort }, Snapshot::Continuum(c)) => {
                let pts = if *sort == Sort::Plus { &c.plus } else { &c.minus };
                pts.iter().filter(|p| lo.iter().zip(hi).enumerate().all(|(k, (a, b))| p.0[k] >= *a && p.0[k] <= *b)).count()
            }
            (Window::Sites { sites, sort }, Snapshot::Lattice { plus, minus }) => {
                let m = if *sort == Sort::Plus { plus } else { minus };
                sites.iter().filter(|&&s| s < 32 && m >> s & 1 == 1).count()
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Events per replica before it is aborted.
    pub event_budget: u64,
    pub keep_snapshots: bool,
    pub lyapunov: Option<LyapunovSpec>,
    pub windows: Vec<Window>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { event_budget: 100_000_000, keep_snapshots: false, lyapunov: None, windows: Vec::new() }
    }
}

/// Per-time replica means and variances of the counting observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub t_grid: Vec<f64>,
    pub mean_plus: Vec<f64>,
    pub var_plus: Vec<f64>,
    pub mean_minus: Vec<f64>,
    pub var_minus: Vec<f64>,
    pub lyapunov_mean: Option<Vec<f64>>,
    pub lyapunov_var: Option<Vec<f64>>,
    /// `window_means[w][i]`: mean count of window `w` at time `i`.
    pub window_means: Vec<Vec<f64>>,
    pub replicas: usize,
    pub seed: u64,
    /// Replicas stopped by the event budget; their last state is carried
    /// forward.
    pub aborted: usize,
}

impl TrajectoryStats {
    pub fn is_partial(&self) -> bool {
        self.aborted > 0
    }

    pub fn stderr_plus(&self, i: usize) -> f64 {
        (self.var_plus[i] / self.replicas as f64).sqrt()
    }

    pub fn stderr_minus(&self, i: usize) -> f64 {
        (self.var_minus[i] / self.replicas as f64).sqrt()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t", "mean_plus", "var_plus", "mean_minus", "var_minus", "lyapunov_mean"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend((0..self.window_means.len()).map(|k| format!("window_{k}")));
        w.write_record(&header)?;
        for i in 0..self.t_grid.len() {
            let mut row = vec![
                self.t_grid[i].to_string(),
                self.mean_plus[i].to_string(),
                self.var_plus[i].to_string(),
                self.mean_minus[i].to_string(),
                self.var_minus[i].to_string(),
                self.lyapunov_mean.as_ref().map_or(String::new(), |v| v[i].to_string()),
            ];
            row.extend(self.window_means.iter().map(|v| v[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Statistics plus, optionally, every replica's configuration at every grid
/// time (`snapshots[time][replica]`).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: TrajectoryStats,
    pub snapshots: Option<Vec<Vec<Snapshot>>>,
}

struct ReplicaRecord {
    counts: Vec<(f64, f64)>,
    lyapunov: Vec<f64>,
    windows: Vec<Vec<f64>>,
    snapshots: Vec<Snapshot>,
    aborted: bool,
}

/// Samples the initial configuration.
pub fn sample_initial(sim: &Simulator, init: &InitialState, rng: &mut ChaCha8Rng) -> Result<SimState> {
    let g = sim.geometry();
    match init {
        InitialState::Empty => {
            if sim.is_lattice() {
                sim.lattice_state(0, 0)
            } else {
                sim.continuum_state(vec![], vec![])
            }
        }
        InitialState::Poisson { z_plus, z_minus, env_burn_in } => {
            if sim.is_lattice() {
                return Err(Error::Unsupported("poisson initial states need a continuum torus".into()));
            }
            let mut draw = |z: f64| -> Result<Vec<Point>> {
                if !(z >= 0.0 && z.is_finite()) {
                    return Err(Error::InvalidParameter(format!("intensity {z} must be finite and >= 0")));
                }
                let mean = z * g.volume();
                let n = if mean > 0.0 {
                    Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng) as usize
                } else {
                    0
                };
                Ok((0..n).map(|_| uniform_point(g, rng)).collect())
            };
            let plus = draw(*z_plus)?;
            let mut minus = draw(*z_minus)?;
            if let Some(burn) = env_burn_in {
                let env = Simulator::new(sim.params(), Variant::EnvironmentOnly { epsilon: TimeScale::Finite(1.0) })?;
                let mut s = env.continuum_state(vec![], minus)?;
                while s.t < *burn {
                    let mut next = s.clone();
                    env.step(&mut next, rng);
                    if next.t > *burn {
                        break;
                    }
                    s = next;
                }
                minus = env.points(&s).1;
            }
            sim.continuum_state(plus, minus)
        }
        InitialState::Fixed { plus, minus } => {
            let pts = |v: &[Vec<f64>]| -> Result<Vec<Point>> {
                v.iter()
                    .map(|c| {
                        if c.len() != g.dim() {
                            Err(Error::InvalidParameter("point dimension differs from geometry".into()))
                        } else {
                            Ok(Point::new(c))
                        }
                    })
                    .collect()
            };
            sim.continuum_state(pts(plus)?, pts(minus)?)
        }
        InitialState::Sites { plus, minus } => {
            let mask = |v: &[usize]| -> Result<u32> {
                v.iter().try_fold(0u32, |m, &s| {
                    if s >= 32 || m >> s & 1 == 1 {
                        Err(Error::InvalidParameter(format!("site {s} repeated or out of range")))
                    } else {
                        Ok(m | 1 << s)
                    }
                })
            };
            sim.lattice_state(mask(plus)?, mask(minus)?)
        }
        InitialState::Bernoulli { p_plus, p_minus } => {
            let n = g.n_sites().ok_or_else(|| Error::Unsupported("bernoulli initial states need a lattice".into()))?;
            let mut draw = |p: f64| (0..n).fold(0u32, |m, i| if rng.random::<f64>() < p { m | 1 << i } else { m });
            let plus = draw(*p_plus);
            let minus = draw(*p_minus);
            sim.lattice_state(plus, minus)
        }
        InitialState::Law { law } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = law.probs.len() - 1;
            for (s, p) in law.probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = s;
                    break;
                }
            }
            let (plus, minus) = law.layout.split(law.n_sites, pick);
            sim.lattice_state(plus, minus)
        }
    }
}

fn run_one(
    sim: &Simulator,
    init: &InitialState,
    t_grid: &[f64],
    seed: u64,
    index: u64,
    options: &RunOptions,
) -> Result<ReplicaRecord> {
    let mut rng = stream(seed, StreamTag::Replica, index);
    let mut st = sample_initial(sim, init, &mut rng)?;
    let mut rec = ReplicaRecord {
        counts: Vec::with_capacity(t_grid.len()),
        lyapunov: Vec::new(),
        windows: vec![Vec::with_capacity(t_grid.len()); options.windows.len()],
        snapshots: Vec::new(),
        aborted: false,
    };
    let record = |st: &SimState, rec: &mut ReplicaRecord| -> Result<()> {
        let snap = sim.snapshot(st);
        let (np, nm) = snap.counts();
        rec.counts.push((np as f64, nm as f64));
        if let Some(spec) = &options.lyapunov {
            let (plus, minus) = sim.points(st);
            rec.lyapunov.push(lyapunov_value(&plus, &minus, spec, sim.geometry())?);
        }
        for (k, w) in options.windows.iter().enumerate() {
            rec.windows[k].push(w.count(&snap) as f64);
        }
        if options.keep_snapshots {
            rec.snapshots.push(snap);
        }
        Ok(())
    };
    let mut idx = 0;
    while idx < t_grid.len() {
        let total = sim.total_rate(&st);
        let t_next = if total > 0.0 {
            let w: f64 = Exp1.sample(&mut rng);
            st.t + w / total
        } else {
            f64::INFINITY
        };
        while idx < t_grid.len() && t_grid[idx] < t_next {
            record(&st, &mut rec)?;
            idx += 1;
        }
        if idx == t_grid.len() {
            break;
        }
        if st.events >= options.event_budget {
            rec.aborted = true;
            while idx < t_grid.len() {
                record(&st, &mut rec)?;
                idx += 1;
            }
            break;
        }
        st.t = t_next;
        st.events += 1;
        let u = rng.random::<f64>() * total;
        sim.apply_event(&mut st, u, &mut rng);
        if st.events % 4096 == 0 {
            sim.refresh(&mut st);
        }
    }
    Ok(rec)
}

fn mean_var(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = if n > 1 { values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    (mean, var)
}

/// Independent replicas on counter-based streams `(seed, replica index)`;
/// results are merged in replica order, so output does not depend on the
/// number of worker threads.
pub fn run_replicas(
    sim: &Simulator,
    init: &InitialState,
    t_grid: &[f64],
    n_replicas: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutput> {
    if n_replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
        return Err(Error::InvalidParameter("time grid must be non-empty, increasing and start at t >= 0".into()));
    }
    let one = |i: usize| run_one(sim, init, t_grid, seed, i as u64, options);
    #[cfg(feature = "parallel")]
    let records: Vec<Result<ReplicaRecord>> = {
        use rayon::prelude::*;
        (0..n_replicas).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<Result<ReplicaRecord>> = (0..n_replicas).map(one).collect();
    let records: Vec<ReplicaRecord> = records.into_iter().collect::<Result<_>>()?;

    let nt = t_grid.len();
    let n = n_replicas;
    let mut stats = TrajectoryStats {
        t_grid: t_grid.to_vec(),
        mean_plus: vec![0.0; nt],
        var_plus: vec![0.0; nt],
        mean_minus: vec![0.0; nt],
        var_minus: vec![0.0; nt],
        lyapunov_mean: options.lyapunov.as_ref().map(|_| vec![0.0; nt]),
        lyapunov_var: options.lyapunov.as_ref().map(|_| vec![0.0; nt]),
        window_means: vec![vec![0.0; nt]; options.windows.len()],
        replicas: n,
        seed,
        aborted: records.iter().filter(|r| r.aborted).count(),
    };
    for i in 0..nt {
        (stats.mean_plus[i], stats.var_plus[i]) = mean_var(records.iter().map(|r| r.counts[i].0), n);
        (stats.mean_minus[i], stats.var_minus[i]) = mean_var(records.iter().map(|r| r.counts[i].1), n);
        if let (Some(m), Some(v)) = (stats.lyapunov_mean.as_mut(), stats.lyapunov_var.as_mut()) {
            (m[i], v[i]) = mean_var(records.iter().map(|r| r.lyapunov[i]), n);
        }
        for (k, wm) in stats.window_means.iter_mut().enumerate() {
            wm[i] = records.iter().map(|r| r.windows[k][i]).sum::<f64>() / n as f64;
        }
    }
    let snapshots = options.keep_snapshots.then(|| {
        let mut by_time: Vec<Vec<Snapshot>> = vec![Vec::with_capacity(n); nt];
        for r in records {
            for (i, s) in r.snapshots.into_iter().enumerate() {
                by_time[i].push(s);
            }
        }
        by_time
    });
    Ok(RunOutput { stats, snapshots })
}

/// Empirical law of lattice snapshots in the layout of `reference`.
pub fn empirical_law(snaps: &[Snapshot], reference: &Distribution) -> Result<Distribution> {
    let mut probs = vec![0.0; reference.probs.len()];
    for s in snaps {
        let Snapshot::Lattice { plus, minus } = s else {
            return Err(Error::Unsupported("empirical laws need lattice snapshots".into()));
        };
        let idx = reference
            .layout
            .join(reference.n_sites, *plus, *minus)
            .ok_or_else(|| Error::InvalidParameter("snapshot does not fit the layout".into()))?;
        probs[idx] += 1.0 / snaps.len() as f64;
    }
    Ok(Distribution { probs, ..reference.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::kernel::Kernel;
    use crate::oracle::{evolve_exact, gibbs_distribution, Generator, LatticeModel};
    use crate::params::fixtures::torus_model;
    use crate::params::ModelParams;

    fn joint() -> Variant {
        Variant::Joint { epsilon: TimeScale::Finite(0.3) }
    }

    #[test]
    fn empty_absorbing_run() {
        let mut p = torus_model(5.0);
        p.z = 0.0;
        let sim = Simulator::new(&p, joint()).unwrap();
        let out = run_replicas(&sim, &InitialState::Empty, &[0.0, 1.0, 5.0], 1, 0, &RunOptions::default()).unwrap();
        assert!(out.stats.mean_plus.iter().chain(&out.stats.mean_minus).all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let sim = Simulator::new(&torus_model(5.0), joint()).unwrap();
        let init = InitialState::Poisson { z_plus: 0.5, z_minus: 1.0, env_burn_in: None };
        let grid = [0.0, 0.5, 1.0];
        let a = run_replicas(&sim, &init, &grid, 16, 42, &RunOptions::default()).unwrap().stats;
        let b = run_replicas(&sim, &init, &grid, 16, 42, &RunOptions::default()).unwrap().stats;
        assert_eq!(a, b);
        let c = run_replicas(&sim, &init, &grid, 16, 43, &RunOptions::default()).unwrap().stats;
        assert_ne!(a, c);
        let more = run_replicas(&sim, &init, &grid, 17, 42, &RunOptions { keep_snapshots: true, ..Default::default() }).unwrap();
        let fewer = run_replicas(&sim, &init, &grid, 16, 42, &RunOptions { keep_snapshots: true, ..Default::default() }).unwrap();
        assert_eq!(more.snapshots.unwrap()[2][..16], fewer.snapshots.unwrap()[2][..]);
    }

    #[test]
    fn event_budget_flags_partial() {
        let sim = Simulator::new(&torus_model(5.0), joint()).unwrap();
        let init = InitialState::Poisson { z_plus: 1.0, z_minus: 1.0, env_burn_in: None };
        let o = RunOptions { event_budget: 10, ..Default::default() };
        let s = run_replicas(&sim, &init, &[0.0, 50.0], 3, 1, &o).unwrap().stats;
        assert!(s.is_partial());
        assert_eq!(s.aborted, 3);
    }

    #[test]
    fn free_environment_mean_count() {
        let p = ModelParams { psi: Kernel::zero(1), ..torus_model(10.0) };
        let sim = Simulator::new(&p, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let s = run_replicas(&sim, &InitialState::Empty, &[10.0], 400, 7, &RunOptions::default()).unwrap().stats;
        assert!((s.mean_minus[0] - 10.0).abs() < 3.0 * s.stderr_minus(0) + 1e-9);
    }

    #[test]
    fn windows_and_csv() {
        let p = ModelParams { psi: Kernel::zero(1), ..torus_model(10.0) };
        let sim = Simulator::new(&p, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let o = RunOptions {
            windows: vec![Window::Box { lo: vec![0.0], hi: vec![5.0], sort: Sort::Minus }],
            ..Default::default()
        };
        let init = InitialState::Fixed { plus: vec![], minus: vec![vec![1.0], vec![7.0]] };
        let s = run_replicas(&sim, &init, &[0.0, 1.0], 2, 0, &o).unwrap().stats;
        assert_eq!(s.window_means[0][0], 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mean_plus,var_plus,mean_minus,var_minus,lyapunov_mean,window_0"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn two_site_environment_matches_gibbs() {
        let p = ModelParams { psi: Kernel::tophat(1.2, 1.5, 1).unwrap(), geometry: Geometry::ring(2, 1.0), ..torus_model(2.0) };
        let model = LatticeModel::new(p.clone()).unwrap();
        let sim = Simulator::new(&p, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let o = RunOptions { keep_snapshots: true, ..Default::default() };
        let out = run_replicas(&sim, &InitialState::Empty, &[12.0], 20_000, 3, &o).unwrap();
        let pi = gibbs_distribution(&model).unwrap();
        let emp = empirical_law(&out.snapshots.unwrap()[0], &pi).unwrap();
        assert!(emp.total_variation(&pi) < 0.02);
    }

    #[test]
    fn three_site_joint_matches_oracle_per_state() {
        let p = ModelParams { geometry: Geometry::ring(3, 1.0), ..torus_model(3.0) };
        let model = LatticeModel::new(p.clone()).unwrap();
        let gen = Generator::new(&model, joint()).unwrap();
        let sim = Simulator::new(&p, joint()).unwrap();
        let init = InitialState::Sites { plus: vec![0, 1], minus: vec![2] };
        let p0 = Distribution::point(3, Layout::Joint, 0b011, 0b100).unwrap();
        let grid = [0.5, 1.0, 2.0];
        let n = 20_000;
        let out = run_replicas(&sim, &init, &grid, n, 11, &RunOptions { keep_snapshots: true, ..Default::default() }).unwrap();
        let snaps = out.snapshots.unwrap();
        for (i, t) in grid.iter().enumerate() {
            let exact = evolve_exact(&gen, &p0, *t).unwrap();
            let emp = empirical_law(&snaps[i], &exact).unwrap();
            for (pe, px) in emp.probs.iter().zip(&exact.probs) {
                let se = (px * (1.0 - px) / n as f64).sqrt();
                assert!((pe - px).abs() <= 4.0 * se + 1e-4, "t={t}: {pe} vs {px}");
            }
        }
    }
}
