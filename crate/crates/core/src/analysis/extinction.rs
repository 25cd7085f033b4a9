use serde::{Deserialize, Serialize};

use crate::envelope::{joint_envelope, averaged_envelope, EnvelopeRates, EnvelopeSpec};
use crate::error::Result;
use crate::sim::TrajectoryStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionRow {
    pub t: f64,
    pub mean_plus: f64,
    pub stderr: f64,
    /// Density envelope times the volume, a bound on the mean count.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionReport {
    /// Least-squares slope of `log mean_plus` over the second half of the
    /// grid; `None` when fewer than two tail points are positive.
    pub slope: Option<f64>,
    /// Exponential rate of the envelope for the density entry.
    pub envelope_rate: f64,
    pub extinct: bool,
    pub pass: bool,
    pub rows: Vec<ExtinctionRow>,
}

/// Compares the mean `+` count with `|Λ|` times the one-point envelope and
/// fits the tail decay rate.
pub fn extinction_diagnostics(
    stats: &TrajectoryStats,
    spec: &EnvelopeSpec,
    rates: &EnvelopeRates,
    volume: f64,
) -> Result<ExtinctionReport> {
    let mut rows = Vec::with_capacity(stats.t_grid.len());
    for (i, &t) in stats.t_grid.iter().enumerate() {
        let bound = if spec.regime.is_averaged() {
            averaged_envelope(spec, rates, spec.rho, t, 1)?
        } else {
            joint_envelope(spec, rates, t, 1, 0, 0.0)?
        };
        rows.push(ExtinctionRow { t, mean_plus: stats.mean_plus[i], stderr: stats.stderr_plus(i), envelope: bound * volume });
    }
    let pass = rows.iter().all(|r| r.mean_plus <= r.envelope + 3.0 * r.stderr);
    let tail = &rows[rows.len() / 2..];
    let extinct = tail.iter().all(|r| r.mean_plus == 0.0);
    let pts: Vec<(f64, f64)> = tail.iter().filter(|r| r.mean_plus > 0.0).map(|r| (r.t, r.mean_plus.ln())).collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    });
    let death = if spec.regime.is_averaged() { rates.m + rates.g * spec.rho } else { rates.m };
    let envelope_rate =
        if spec.regime.is_subcritical() { -spec.delta } else { rates.a_plus_l1 + spec.delta - death };
    Ok(ExtinctionReport { slope, envelope_rate, extinct, pass, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::Regime;
    use crate::kernel::Kernel;
    use crate::params::fixtures::torus_model;
    use crate::params::ModelParams;
    use crate::real::TimeScale;
    use crate::sim::{run_replicas, InitialState, RunOptions, Simulator};
    use crate::oracle::Variant;

    #[test]
    fn pure_death_slope() {
        let p = ModelParams { a_plus: Kernel::gaussian(1e-9, 0.5, 1).unwrap(), a_minus: Kernel::zero(1), g: 0.0, m: 1.0, ..torus_model(5.0) };
        let sim = Simulator::new(&p, Variant::Joint { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let init = InitialState::Fixed { plus: (0..200).map(|i| vec![i as f64 * 0.02]).collect(), minus: vec![] };
        let grid: Vec<f64> = (0..=10).map(|i| 0.2 * i as f64).collect();
        let stats = run_replicas(&sim, &init, &grid, 40, 9, &RunOptions::default()).unwrap().stats;
        let spec = EnvelopeSpec {
            norm_k0: 200.0 / 5.0,
            alpha_delta_plus: 0.1,
            alpha_minus: 0.0,
            delta: 0.5,
            regime: Regime::JointSubcritical,
            rho: 0.0,
            alpha_plus: None,
        };
        let rates = EnvelopeRates::from_params(&p);
        let r = extinction_diagnostics(&stats, &spec, &rates, 5.0).unwrap();
        assert!((r.slope.unwrap() + 1.0).abs() < 0.1, "{:?}", r.slope);
        assert!(r.pass);
        assert!(!r.extinct);
        assert_eq!(r.envelope_rate, -0.5);
    }

    #[test]
    fn extinct_run_has_no_slope() {
        let mut p = torus_model(5.0);
        p.z = 0.0;
        let sim = Simulator::new(&p, Variant::Joint { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let stats = run_replicas(&sim, &InitialState::Empty, &[0.0, 1.0, 2.0, 3.0], 2, 0, &RunOptions::default()).unwrap().stats;
        let spec = EnvelopeSpec {
            norm_k0: 1.0,
            alpha_delta_plus: 0.1,
            alpha_minus: 0.0,
            delta: 0.5,
            regime: Regime::JointSupercritical,
            rho: 0.0,
            alpha_plus: None,
        };
        let r = extinction_diagnostics(&stats, &spec, &EnvelopeRates::from_params(&p), 5.0).unwrap();
        assert!(r.extinct && r.slope.is_none() && r.pass);
    }
}
