//! Browser bindings: envelope curves, a small torus simulation and an exact
//! averaging scan. Each operation returns a JSON string.

use bdlp_core::analysis::{averaging_error, AveragingMode, Observable};
use bdlp_core::envelope::{joint_envelope, averaged_envelope, EnvelopeRates, EnvelopeSpec, Regime};
use bdlp_core::oracle::Variant;
use bdlp_core::sim::{run_replicas, InitialState, RunOptions, Simulator, Snapshot};
use bdlp_core::{Geometry, Kernel, ModelParams, TimeScale};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn params(m: f64, g: f64, z: f64, epsilon: f64, geometry: Geometry) -> Result<ModelParams, String> {
    let k = Kernel::gaussian(1.0, 0.5, 1).map_err(|e| e.to_string())?;
    let p = ModelParams {
        m,
        g,
        z,
        epsilon: TimeScale::from_value(epsilon),
        vartheta: 1.0,
        lambda: 0.0,
        a_plus: k.clone(),
        a_minus: k.clone(),
        b_minus: k,
        psi: Kernel::zero(1),
        geometry,
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn grid(t_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

#[derive(Serialize)]
struct Curves {
    t: Vec<f64>,
    joint: Option<Vec<f64>>,
    averaged: Option<Vec<f64>>,
    joint_regime: Regime,
    averaged_regime: Regime,
}

/// One-point envelopes of the joint and averaged dynamics for a unit-mass
/// branching kernel, `α⁺ = 0.1`, `ρ = z` and `δ` a fraction of the admissible
/// range.
pub fn envelope_curves_json(m: f64, g: f64, z: f64, delta_fraction: f64, t_max: f64) -> Result<String, String> {
    if !(delta_fraction > 0.0 && delta_fraction < 1.0) {
        return Err("delta fraction must lie in (0, 1)".into());
    }
    if ![m, g, z].iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err("m, g and z must be finite and >= 0".into());
    }
    let rates = EnvelopeRates { m, g, lambda: 0.0, vartheta: 1.0, a_plus_l1: 1.0 };
    let t = grid(t_max, 101);
    let curve = |regime: Regime, death: f64| -> Option<Vec<f64>> {
        let gap = (death - 1.0).abs();
        let delta = if regime.is_subcritical() { delta_fraction * gap } else { delta_fraction };
        let spec = EnvelopeSpec {
            norm_k0: 1.0,
            alpha_delta_plus: 0.1,
            alpha_minus: 0.0,
            delta,
            regime,
            rho: z,
            alpha_plus: Some(0.1),
        };
        t.iter()
            .map(|&t| {
                if regime.is_averaged() {
                    averaged_envelope(&spec, &rates, z, t, 1)
                } else {
                    joint_envelope(&spec, &rates, t, 1, 0, 0.0)
                }
                .ok()
            })
            .collect()
    };
    let joint_regime = if m > 1.0 { Regime::JointSubcritical } else { Regime::JointSupercritical };
    let averaged_regime = if m + g * z > 1.0 { Regime::AveragedSubcritical } else { Regime::AveragedSupercritical };
    let out = Curves {
        joint: curve(joint_regime, m),
        averaged: curve(averaged_regime, m + g * z),
        t,
        joint_regime,
        averaged_regime,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SimulationView {
    t: Vec<f64>,
    mean_plus: Vec<f64>,
    mean_minus: Vec<f64>,
    /// Final configuration of the first replica.
    plus: Vec<f64>,
    minus: Vec<f64>,
}

/// Joint dynamics on a one-dimensional torus started from Poisson(z) in both
/// sorts.
#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    m: f64,
    g: f64,
    z: f64,
    epsilon: f64,
    side: f64,
    replicas: usize,
    t_max: f64,
    seed: u64,
) -> Result<String, String> {
    let p = params(m, g, z, epsilon, Geometry::torus(side, 1))?;
    let sim = Simulator::new(&p, Variant::Joint { epsilon: p.epsilon }).map_err(|e| e.to_string())?;
    let init = InitialState::Poisson { z_plus: z, z_minus: z, env_burn_in: None };
    let t = grid(t_max, 41);
    let opts = RunOptions { event_budget: 2_000_000, keep_snapshots: true, ..Default::default() };
    let out = run_replicas(&sim, &init, &t, replicas.max(1), seed, &opts).map_err(|e| e.to_string())?;
    let (plus, minus) = match out.snapshots.as_ref().and_then(|s| s.last()).and_then(|v| v.first()) {
        Some(Snapshot::Continuum(c)) => (c.plus.iter().map(|x| x.0[0]).collect(), c.minus.iter().map(|x| x.0[0]).collect()),
        _ => (Vec::new(), Vec::new()),
    };
    let view = SimulationView { t, mean_plus: out.stats.mean_plus, mean_minus: out.stats.mean_minus, plus, minus };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Scan {
    epsilon: Vec<f64>,
    sup_error: Vec<f64>,
    rho: f64,
}

/// Exact sup-over-`[0, t_max]` gap between the joint `+` count and the
/// averaged one on a 3-site ring.
pub fn averaging_scan_json(g: f64, t_max: f64) -> Result<String, String> {
    let p = params(1.0, g, 1.0, 1.0, Geometry::ring(3, 1.0))?;
    let eps = [1.0, 0.3, 0.1, 0.03];
    let eps_ts: Vec<TimeScale> = eps.iter().map(|e| TimeScale::Finite(*e)).collect();
    let init = InitialState::Sites { plus: vec![0, 1], minus: vec![] };
    let r = averaging_error(&p, &eps_ts, &grid(t_max, 41), &[Observable::TotalPlus], &init, &AveragingMode::Oracle)
        .map_err(|e| e.to_string())?;
    let scan = Scan { epsilon: eps.to_vec(), sup_error: r.errors(&Observable::TotalPlus), rho: r.rho };
    serde_json::to_string(&scan).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn envelope_curves(m: f64, g: f64, z: f64, delta_fraction: f64, t_max: f64) -> Result<String, JsValue> {
    envelope_curves_json(m, g, z, delta_fraction, t_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    m: f64,
    g: f64,
    z: f64,
    epsilon: f64,
    side: f64,
    replicas: usize,
    t_max: f64,
    seed: u64,
) -> Result<String, JsValue> {
    simulate_json(m, g, z, epsilon, side, replicas, t_max, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn averaging_scan(g: f64, t_max: f64) -> Result<String, JsValue> {
    averaging_scan_json(g, t_max).map_err(|e| JsValue::from_str(&e))
}
