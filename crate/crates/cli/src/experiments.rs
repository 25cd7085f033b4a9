//! Runs one configured experiment and writes its artifacts.

use std::path::PathBuf;

use anyhow::{bail, Context};
use bdlp_core::admissibility::{admissibility_report, AdmissibilityOptions};
use bdlp_core::analysis::{averaging_error, estimate_correlations, extinction_diagnostics, AveragingReport};
use bdlp_core::combinatorics::FiniteConfig;
use bdlp_core::envelope::EnvelopeRates;
use bdlp_core::hierarchy::{integrate_hierarchy, ruelle_bound_check, CorrelationTable, HierarchyOptions};
use bdlp_core::lyapunov::{check_weight_condition, lyapunov_bound, lyapunov_constants, LyapunovSpec};
use bdlp_core::oracle::{correlation_from_distribution, evolve_grid, Distribution, Generator, LatticeModel};
use bdlp_core::sim::{empirical_law, run_replicas, RunOptions, Simulator, Snapshot};
use bdlp_core::{Kernel, ModelParams};
use serde_json::json;

use crate::artifacts::{Artifacts, Manifest};
use crate::config::*;

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    pub quiet: bool,
    pub threads: usize,
}

/// Failed acceptance assertions of a `report` run.
#[derive(Debug)]
pub struct AcceptanceFailure(pub Vec<String>);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance checks failed: {}", self.0.join("; "))
    }
}

impl std::error::Error for AcceptanceFailure {}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    params: ModelParams,
    art: Artifacts,
    quiet: bool,
    failures: Vec<String>,
}

impl Ctx<'_> {
    /// One line of JSON on stderr.
    fn log(&self, event: &str, fields: serde_json::Value) {
        if !self.quiet {
            eprintln!("{}", json!({"event": event, "experiment": self.cfg.experiment.name(), "data": fields}));
        }
    }

    fn lattice(&self) -> anyhow::Result<LatticeModel> {
        LatticeModel::new(self.params.clone()).context("this experiment needs a lattice model within oracle limits")
    }

    fn rates(&self) -> anyhow::Result<EnvelopeRates> {
        Ok(if self.params.geometry.is_lattice() { self.lattice()?.envelope_rates() } else { EnvelopeRates::from_params(&self.params) })
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

/// Runs the experiment. Returns the manifest; acceptance failures of a
/// `report` run are recorded in it and also returned as an error.
pub fn run(cfg: &ExperimentConfig, settings: &RunSettings) -> anyhow::Result<Manifest> {
    let params = cfg.params()?;
    cfg.validate()?;
    let art = Artifacts::create(&settings.out_dir)?;
    let mut ctx = Ctx { cfg, params, art, quiet: settings.quiet, failures: Vec::new() };
    ctx.log("start", json!({"seed": cfg.seed, "threads": settings.threads}));
    match &cfg.experiment {
        Experiment::Check(b) => check(&mut ctx, b)?,
        Experiment::Simulate(b) => simulate(&mut ctx, b)?,
        Experiment::Oracle(b) => oracle(&mut ctx, b)?,
        Experiment::Hierarchy(b) => hierarchy(&mut ctx, b)?,
        Experiment::AverageScan(b) => {
            let r = scan(&mut ctx, b)?;
            ctx.log("averaging", json!({"rows": r.rows}));
        }
        Experiment::Lyapunov(b) => lyapunov(&mut ctx, b)?,
        Experiment::Report(b) => report(&mut ctx, b)?,
    }
    let Ctx { art, failures, .. } = ctx;
    let manifest = art.finish(cfg.experiment.name(), cfg.hash(), cfg.seed, settings.threads, failures.clone())?;
    if !failures.is_empty() {
        return Err(AcceptanceFailure(failures).into());
    }
    Ok(manifest)
}

fn check(ctx: &mut Ctx, b: &CheckBlock) -> anyhow::Result<()> {
    let opts = b.options.clone().unwrap_or(AdmissibilityOptions { seed: ctx.cfg.seed, ..Default::default() });
    let rep = admissibility_report(&ctx.params, &opts)?;
    ctx.log(
        "admissibility",
        json!({"coupling_ok": rep.coupling_ok, "averaging_ok": rep.averaging_ok, "coupling_window": rep.coupling_window}),
    );
    ctx.art.write_json("admissibility.json", &rep)
}

fn simulate(ctx: &mut Ctx, b: &SimulateBlock) -> anyhow::Result<()> {
    let variant = b.dynamics.variant(&ctx.params)?;
    let sim = Simulator::new(&ctx.params, variant)?;
    let lyapunov = match &b.lyapunov {
        Some(w) => Some(LyapunovSpec::new(Kernel::new(w.e.clone(), ctx.params.geometry.dim())?, w.kappa)?),
        None => None,
    };
    let opts = RunOptions {
        event_budget: b.event_budget.unwrap_or(RunOptions::default().event_budget),
        keep_snapshots: b.pair_bins.is_some() || b.compare_oracle,
        lyapunov,
        windows: b.windows.clone(),
    };
    let out = run_replicas(&sim, &b.initial, &b.t_grid, b.replicas, ctx.cfg.seed, &opts)?;
    ctx.log("simulated", json!({"replicas": b.replicas, "aborted": out.stats.aborted}));
    ctx.art.write_with("trajectory.csv", |w| out.stats.write_csv(w))?;
    ctx.art.write_json("summary.json", &out.stats)?;
    let snaps = out.snapshots.unwrap_or_default();
    if let Some(bins) = &b.pair_bins {
        let last: Vec<FiniteConfig<_>> = snaps
            .last()
            .map(|v| {
                v.iter()
                    .filter_map(|s| match s {
                        Snapshot::Continuum(c) => Some(c.clone()),
                        Snapshot::Lattice { .. } => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let est = estimate_correlations(&last, &ctx.params.geometry, bins)?;
        ctx.art.write_with("pair_correlation.csv", |w| est.write_csv(w))?;
        ctx.art.write_json("pair_correlation.json", &est)?;
    }
    if b.compare_oracle {
        let model = ctx.lattice()?;
        let gen = Generator::new(&model, variant)?;
        let mu0 = b.initial.lattice_law(model.n_sites, gen.layout())?;
        let exact = evolve_grid(&gen, &mu0, &b.t_grid)?;
        let mut rows = Vec::new();
        for (i, law) in exact.iter().enumerate() {
            let emp = empirical_law(&snaps[i], law)?;
            rows.push(vec![f(b.t_grid[i]), f(emp.total_variation(law)), law.probs.len().to_string()]);
        }
        ctx.log("oracle_comparison", json!({"total_variation": rows.iter().map(|r| r[1].clone()).collect::<Vec<_>>()}));
        ctx.art.write_csv_rows("oracle_tv.csv", &["t", "total_variation", "n_states"], &rows)?;
    }
    Ok(())
}

fn law_rows(laws: &[Distribution]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut summary = Vec::new();
    let mut long = Vec::new();
    for d in laws {
        let n = d.n_sites;
        let mut row = vec![f(d.t), f(d.mean_plus_count()), f(d.mean_minus_count()), f(d.expect(|p, _| (p != 0) as u8 as f64))];
        row.extend((0..n).map(|x| f(d.expect(|p, _| (p >> x & 1) as f64))));
        summary.push(row);
        for (s, p) in d.probs.iter().enumerate() {
            let (pl, mi) = d.layout.split(n, s);
            long.push(vec![f(d.t), s.to_string(), pl.to_string(), mi.to_string(), f(*p)]);
        }
    }
    (summary, long)
}

fn oracle(ctx: &mut Ctx, b: &OracleBlock) -> anyhow::Result<()> {
    let model = ctx.lattice()?;
    let gen = Generator::new(&model, b.dynamics.variant(&ctx.params)?)?;
    let mu0 = b.initial.lattice_law(model.n_sites, gen.layout())?;
    let laws = evolve_grid(&gen, &mu0, &b.t_grid)?;
    let (summary, long) = law_rows(&laws);
    let mut header = vec!["t".to_string(), "mean_plus".into(), "mean_minus".into(), "survival".into()];
    header.extend((0..model.n_sites).map(|x| format!("plus_{x}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.art.write_csv_rows("oracle.csv", &header, &summary)?;
    ctx.art.write_csv_rows("law.csv", &["t", "state", "plus", "minus", "prob"], &long)?;
    if let Some(orders) = b.orders {
        let tables = laws
            .iter()
            .map(|d| correlation_from_distribution(d, model.site_volume, orders))
            .collect::<bdlp_core::Result<Vec<_>>>()?;
        let pairs: Vec<(f64, &CorrelationTable)> = b.t_grid.iter().copied().zip(tables.iter()).collect();
        ctx.art.write_with("correlations.csv", |w| CorrelationTable::write_csv(&pairs, w))?;
    }
    ctx.log("oracle", json!({"states": gen.n_states(), "times": b.t_grid.len()}));
    Ok(())
}

fn hierarchy(ctx: &mut Ctx, b: &HierarchyBlock) -> anyhow::Result<()> {
    let model = ctx.lattice()?;
    let variant = b.dynamics.variant(&ctx.params)?;
    let gen = Generator::new(&model, variant)?;
    let mu0 = b.initial.lattice_law(model.n_sites, gen.layout())?;
    let k0 = correlation_from_distribution(&mu0, model.site_volume, b.orders)?;
    let opts = HierarchyOptions { closure: b.closure, exclusion: b.exclusion };
    let tables = integrate_hierarchy(&k0, &model, variant, opts, &b.t_grid, b.step)?;
    let pairs: Vec<(f64, CorrelationTable)> = b.t_grid.iter().copied().zip(tables).collect();
    let refs: Vec<(f64, &CorrelationTable)> = pairs.iter().map(|(t, k)| (*t, k)).collect();
    ctx.art.write_with("hierarchy.csv", |w| CorrelationTable::write_csv(&refs, w))?;
    if b.compare_oracle {
        let laws = evolve_grid(&gen, &mu0, &b.t_grid)?;
        let mut rows = Vec::new();
        for (law, (t, k)) in laws.iter().zip(&pairs) {
            let exact = correlation_from_distribution(law, model.site_volume, b.orders)?;
            rows.push(vec![f(*t), f(k.max_abs_diff(&exact))]);
        }
        ctx.log("oracle_residual", json!({"max_abs_diff": rows.iter().map(|r| r[1].clone()).collect::<Vec<_>>()}));
        ctx.art.write_csv_rows("oracle_residual.csv", &["t", "max_abs_diff"], &rows)?;
    }
    if let Some(env) = &b.envelope {
        let rep = ruelle_bound_check(&pairs, env, &model)?;
        ctx.log("ruelle", json!({"pass": rep.pass, "worst_ratio": rep.worst_ratio}));
        ctx.art.write_json("ruelle.json", &rep)?;
    }
    Ok(())
}

fn scan(ctx: &mut Ctx, b: &AverageScanBlock) -> anyhow::Result<AveragingReport> {
    let mode = b.mode.with_seed(ctx.cfg.seed);
    let r = averaging_error(&ctx.params, &b.epsilon_list, &b.t_grid, &b.observables, &b.initial, &mode)?;
    ctx.art.write_with("averaging.csv", |w| r.write_csv(w))?;
    ctx.art.write_with("averaging_curves.csv", |w| r.write_curves_csv(w))?;
    Ok(r)
}

fn lyapunov(ctx: &mut Ctx, b: &LyapunovBlock) -> anyhow::Result<()> {
    let spec = LyapunovSpec::new(Kernel::new(b.weight.e.clone(), ctx.params.geometry.dim())?, b.weight.kappa)?;
    check_weight_condition(&spec, &ctx.params)?;
    let constants = lyapunov_constants(&spec, &ctx.params)?;
    let sim = Simulator::new(&ctx.params, Dynamics::Joint.variant(&ctx.params)?)?;
    let opts = RunOptions {
        event_budget: b.event_budget.unwrap_or(RunOptions::default().event_budget),
        lyapunov: Some(spec),
        ..Default::default()
    };
    let stats = run_replicas(&sim, &b.initial, &b.t_grid, b.replicas, ctx.cfg.seed, &opts)?.stats;
    let (Some(mean), Some(var)) = (&stats.lyapunov_mean, &stats.lyapunov_var) else {
        bail!("simulation did not record the Lyapunov functional");
    };
    let v0 = mean[0];
    let mut rows = Vec::new();
    let mut pass = true;
    for (i, &t) in b.t_grid.iter().enumerate() {
        let bound = lyapunov_bound(v0, t, &ctx.params, &constants);
        let ok = mean[i] <= bound;
        pass &= ok;
        rows.push(vec![f(t), f(mean[i]), f((var[i] / stats.replicas as f64).sqrt()), f(bound), ok.to_string()]);
    }
    ctx.log("lyapunov", json!({"pass": pass, "c_epsilon": constants.c_epsilon}));
    ctx.art.write_csv_rows("lyapunov.csv", &["t", "mean_v", "stderr_v", "bound", "within"], &rows)?;
    ctx.art.write_json("lyapunov.json", &json!({"constants": constants, "pass": pass, "aborted": stats.aborted}))
}

/// True when at most one step of the sequence increases by more than three
/// combined standard errors.
pub fn nonincreasing_within_noise(errors: &[f64], stderrs: &[f64]) -> bool {
    let inversions = (1..errors.len())
        .filter(|&i| errors[i] > errors[i - 1] + 3.0 * (stderrs[i].powi(2) + stderrs[i - 1].powi(2)).sqrt())
        .count();
    inversions <= 1
}

fn report(ctx: &mut Ctx, b: &ReportBlock) -> anyhow::Result<()> {
    let sim = Simulator::new(&ctx.params, b.dynamics.variant(&ctx.params)?)?;
    let stats = run_replicas(&sim, &b.initial, &b.t_grid, b.replicas, ctx.cfg.seed, &RunOptions::default())?.stats;
    let rates = ctx.rates()?;
    let ext = extinction_diagnostics(&stats, &b.envelope, &rates, ctx.params.geometry.volume())?;
    let rows: Vec<Vec<String>> =
        ext.rows.iter().map(|r| vec![f(r.t), f(r.mean_plus), f(r.stderr), f(r.envelope)]).collect();
    ctx.art.write_csv_rows("extinction.csv", &["t", "mean_plus", "stderr", "envelope"], &rows)?;
    let mut checks = vec![json!({"name": "envelope_dominance", "pass": ext.pass})];
    if !ext.pass {
        ctx.failures.push("mean count exceeds the density envelope".into());
    }
    if let Some(a) = &b.averaging {
        let r = scan(ctx, a)?;
        for obs in &a.observables {
            let label = obs.label();
            let sel: Vec<_> = r.rows.iter().filter(|row| row.observable == label).collect();
            let e: Vec<f64> = sel.iter().map(|row| row.sup_error).collect();
            let se: Vec<f64> = sel.iter().map(|row| row.stderr).collect();
            let pass = nonincreasing_within_noise(&e, &se);
            checks.push(json!({"name": format!("averaging_monotone_{label}"), "pass": pass, "errors": e}));
            if !pass {
                ctx.failures.push(format!("averaging error for {label} is not decreasing in epsilon"));
            }
        }
    }
    ctx.log("report", json!({"checks": checks}));
    ctx.art.write_json("report.json", &json!({"checks": checks, "extinction": ext}))
}
