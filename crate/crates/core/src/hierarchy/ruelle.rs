use serde::{Deserialize, Serialize};

use crate::envelope::{joint_envelope, averaged_envelope, EnvelopeSpec};
use crate::error::Result;
use crate::hierarchy::CorrelationTable;
use crate::oracle::{bits, LatticeModel};

/// Ratios above `1 + RUELLE_TOL` fail.
pub const RUELLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuelleRow {
    pub t: f64,
    pub worst_ratio: f64,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuelleReport {
    pub pass: bool,
    pub worst_ratio: f64,
    pub rows: Vec<RuelleRow>,
}

/// Compares every entry of every table against the envelope, with the
/// cross energy `E_b` taken from the lattice `B⁻` matrix. In subcritical
/// regimes entries with `η⁺ = ∅` carry no decay factor `e^{−δt}`, since
/// `k(∅, η⁻)` is driven by the environment alone.
pub fn ruelle_bound_check(tables: &[(f64, CorrelationTable)], spec: &EnvelopeSpec, model: &LatticeModel) -> Result<RuelleReport> {
    let rates = model.envelope_rates();
    spec.validate(&rates)?;
    let mut rows = Vec::with_capacity(tables.len());
    for (t, k) in tables {
        let mut row = RuelleRow { t: *t, worst_ratio: 0.0, plus: vec![], minus: vec![], value: 0.0, bound: 0.0 };
        for (a, b) in k.entries() {
            let np = a.count_ones() as usize;
            let nm = b.count_ones() as usize;
            let mut bound = if spec.regime.is_averaged() {
                averaged_envelope(spec, &rates, spec.rho, *t, np)?
            } else {
                let e_b: f64 = bits(a).map(|x| bits(b).map(|y| model.b_minus_at(x, y)).sum::<f64>()).sum();
                joint_envelope(spec, &rates, *t, np, nm, e_b)?
            };
            if np == 0 && spec.regime.is_subcritical() {
                bound *= (spec.delta * t).exp();
            }
            let value = k.get(a, b);
            let ratio = if bound > 0.0 {
                value / bound
            } else if value > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > row.worst_ratio || row.plus.is_empty() && row.minus.is_empty() && row.bound == 0.0 {
                row = RuelleRow {
                    t: *t,
                    worst_ratio: ratio,
                    plus: bits(a).collect(),
                    minus: bits(b).collect(),
                    value,
                    bound,
                };
            }
        }
        rows.push(row);
    }
    let worst_ratio = rows.iter().map(|r| r.worst_ratio).fold(0.0, f64::max);
    Ok(RuelleReport { pass: worst_ratio <= 1.0 + RUELLE_TOL, worst_ratio, rows })
}
