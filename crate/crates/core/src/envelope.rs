//! A priori bound envelopes for correlation functions of the joint and the
//! averaged dynamics.

use serde::{Deserialize, Serialize};

use crate::admissibility::alpha_star_plus;
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `m > ‖a⁺‖₁`.
    JointSubcritical,
    /// `m ≤ ‖a⁺‖₁`.
    JointSupercritical,
    /// `m + gρ > ‖a⁺‖₁`.
    AveragedSubcritical,
    /// `m + gρ ≤ ‖a⁺‖₁`.
    AveragedSupercritical,
}

impl Regime {
    pub fn is_averaged(self) -> bool {
        matches!(self, Regime::AveragedSubcritical | Regime::AveragedSupercritical)
    }

    pub fn is_subcritical(self) -> bool {
        matches!(self, Regime::JointSubcritical | Regime::AveragedSubcritical)
    }
}

/// User-chosen envelope inputs; validated against the case constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub norm_k0: f64,
    pub alpha_delta_plus: f64,
    pub alpha_minus: f64,
    pub delta: f64,
    pub regime: Regime,
    #[serde(default)]
    pub rho: f64,
    /// The weight `α⁺` at which `norm_k0` was taken; when present,
    /// `α_δ⁺ ≥ α⁺` is enforced.
    #[serde(default)]
    pub alpha_plus: Option<f64>,
}

/// The rate constants entering the envelopes. Lattice models substitute
/// their discrete kernel masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRates {
    pub m: f64,
    pub g: f64,
    pub lambda: f64,
    pub vartheta: f64,
    pub a_plus_l1: f64,
}

impl EnvelopeRates {
    pub fn from_params(p: &ModelParams) -> Self {
        Self { m: p.m, g: p.g, lambda: p.lambda, vartheta: p.vartheta, a_plus_l1: p.a_plus_l1() }
    }
}

impl EnvelopeSpec {
    /// Checks the regime sign test and the constraints on `δ` and `α_δ⁺`.
    pub fn validate(&self, rates: &EnvelopeRates) -> Result<()> {
        let fail = |msg: String| Err(Error::Constraint(msg));
        if !(self.norm_k0 >= 0.0 && self.norm_k0.is_finite()) {
            return fail(format!("norm_k0 = {} must be finite and >= 0", self.norm_k0));
        }
        if !(self.delta > 0.0) {
            return fail(format!("delta = {} must be > 0", self.delta));
        }
        if self.regime.is_averaged() && !(self.rho >= 0.0) {
            return fail(format!("rho = {} must be >= 0", self.rho));
        }
        let death = if self.regime.is_averaged() { rates.m + rates.g * self.rho } else { rates.m };
        let a = rates.a_plus_l1;
        let sub = death > a;
        if sub != self.regime.is_subcritical() {
            let rel = if sub { ">" } else { "<=" };
            return fail(format!("regime {:?} does not match death rate {death} {rel} |a+|_1 = {a}", self.regime));
        }
        let lam = rates.lambda;
        let base = alpha_star_plus(rates.vartheta, lam, rates.m)?;
        if self.alpha_delta_plus <= base {
            return fail(format!("alpha_delta+ = {} must exceed alpha*+ = {base}", self.alpha_delta_plus));
        }
        if let Some(ap) = self.alpha_plus {
            if self.alpha_delta_plus < ap {
                return fail(format!("alpha_delta+ = {} must be >= alpha+ = {ap}", self.alpha_delta_plus));
            }
            if lam == 0.0 && self.alpha_delta_plus != ap {
                return fail(format!("lambda = 0 requires alpha_delta+ = alpha+ = {ap}"));
            }
        }
        if sub {
            let gap = death - a;
            if self.delta >= gap {
                return fail(format!("delta = {} must lie in (0, {gap})", self.delta));
            }
            if lam > 0.0 {
                let need = (lam / (gap - self.delta)).ln();
                if self.alpha_delta_plus < need {
                    return fail(format!("alpha_delta+ = {} must be >= log(lambda/(gap - delta)) = {need}", self.alpha_delta_plus));
                }
            }
        } else if lam > 0.0 {
            if self.delta >= lam + death {
                return fail(format!("delta = {} must lie in (0, {})", self.delta, lam + death));
            }
            let need = (lam / self.delta).ln();
            if self.alpha_delta_plus <= need {
                return fail(format!("alpha_delta+ = {} must be > log(lambda/delta) = {need}", self.alpha_delta_plus));
            }
        }
        Ok(())
    }
}

/// Joint-dynamics bound on `k_t(η)` for `|η⁺| = n_plus`, `|η⁻| = n_minus`
/// and cross energy `E_b = E_{b⁻}(η⁺, η⁻)`.
pub fn joint_envelope(spec: &EnvelopeSpec, rates: &EnvelopeRates, t: f64, n_plus: usize, n_minus: usize, e_b: f64) -> Result<f64> {
    if spec.regime.is_averaged() {
        return Err(Error::Constraint("joint envelope needs a joint regime".into()));
    }
    spec.validate(rates)?;
    let np = n_plus as f64;
    let mut exponent = spec.alpha_delta_plus * np + spec.alpha_minus * n_minus as f64 - rates.g * t * e_b;
    if spec.regime.is_subcritical() {
        exponent -= spec.delta * t;
    } else {
        exponent += (rates.a_plus_l1 + spec.delta - rates.m) * np * t;
    }
    Ok(spec.norm_k0 * exponent.exp())
}

/// Averaged-dynamics bound on `k̄_t(η⁺)`, `m` replaced by `m + gρ`.
pub fn averaged_envelope(spec: &EnvelopeSpec, rates: &EnvelopeRates, rho: f64, t: f64, n_plus: usize) -> Result<f64> {
    if !spec.regime.is_averaged() {
        return Err(Error::Constraint("averaged envelope needs an averaged regime".into()));
    }
    let spec = EnvelopeSpec { rho, ..spec.clone() };
    spec.validate(rates)?;
    let np = n_plus as f64;
    let mut exponent = spec.alpha_delta_plus * np;
    if spec.regime.is_subcritical() {
        exponent -= spec.delta * t;
    } else {
        exponent += (rates.a_plus_l1 + spec.delta - rates.m - rates.g * rho) * np * t;
    }
    Ok(spec.norm_k0 * exponent.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub bound: f64,
}

/// Envelope values on a time grid for each `(n⁺, n⁻)` pair, with `E_b = 0`
/// (the largest value over configurations).
pub fn envelope_curve(spec: &EnvelopeSpec, rates: &EnvelopeRates, t_grid: &[f64], orders: &[(usize, usize)]) -> Result<Vec<EnvelopeRow>> {
    let mut rows = Vec::with_capacity(t_grid.len() * orders.len());
    for &(n_plus, n_minus) in orders {
        for &t in t_grid {
            let bound = if spec.regime.is_averaged() {
                averaged_envelope(spec, rates, spec.rho, t, n_plus)?
            } else {
                joint_envelope(spec, rates, t, n_plus, n_minus, 0.0)?
            };
            rows.push(EnvelopeRow { t, n_plus, n_minus, bound });
        }
    }
    Ok(rows)
}
