use serde::{Deserialize, Serialize};

use crate::combinatorics::subsets;
use crate::error::{Error, Result};
use crate::hierarchy::CorrelationTable;
use crate::oracle::{bits, LatticeModel, Variant};

/// Supplies entries above the table's orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Missing entries are zero.
    TruncateZero,
    /// Missing entries factorize into a stored entry times one-point
    /// densities, averaged over the choice of the stored sub-configuration.
    #[default]
    PoissonProduct,
}

/// How the site sums treat the one-particle-per-site rule of the lattice
/// chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Plain quadrature of the continuum integrals.
    None,
    /// Exact for the lattice chain: births onto occupied sites are removed,
    /// which adds terms of relative order `v`.
    #[default]
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HierarchyOptions {
    #[serde(default)]
    pub closure: Closure,
    #[serde(default)]
    pub exclusion: Exclusion,
}

/// Entry lookup with the closure applied beyond the stored orders.
fn lookup(k: &CorrelationTable, closure: Closure, plus: u32, minus: u32) -> Result<f64> {
    if k.contains(plus, minus) {
        return Ok(k.get(plus, minus));
    }
    match closure {
        Closure::TruncateZero => Ok(0.0),
        Closure::PoissonProduct => {
            let (np, nm) = k.orders();
            if plus.count_ones() as usize > np && np == 0 {
                return Err(Error::ClosureUnavailable("poisson_product needs the (1,0) component"));
            }
            if minus.count_ones() as usize > nm && nm == 0 {
                return Err(Error::ClosureUnavailable("poisson_product needs the (0,1) component"));
            }
            let keep = |mask: u32, n: usize| -> Vec<u32> {
                if mask.count_ones() as usize <= n {
                    vec![mask]
                } else {
                    subsets(mask).filter(|s| s.count_ones() as usize == n).collect()
                }
            };
            let dp = keep(plus, np);
            let dm = keep(minus, nm);
            let mut acc = 0.0;
            for &a in &dp {
                let pa: f64 = bits(plus & !a).map(|y| k.get(1 << y, 0)).product();
                for &b in &dm {
                    let pb: f64 = bits(minus & !b).map(|y| k.get(0, 1 << y)).product();
                    acc += k.get(a, b) * pa * pb;
                }
            }
            Ok(acc / (dp.len() * dm.len()) as f64)
        }
    }
}

/// `Π_{y∈ξ} (e^{−Ψ(x,y)} − 1) v` for every `ξ ⊆` sites, per `x`.
fn ursell_tables(model: &LatticeModel) -> Vec<Vec<f64>> {
    let n = model.n_sites;
    let v = model.site_volume;
    (0..n)
        .map(|x| {
            let mut t = vec![1.0; 1 << n];
            for s in 1..(1usize << n) {
                let y = s.trailing_zeros() as usize;
                t[s] = t[s & (s - 1)] * ((-model.psi_at(x, y)).exp() - 1.0) * v;
            }
            t
        })
        .collect()
}

/// The time derivative `L^Δ k` of a correlation table under the lattice
/// chain: the `+` part (`A^Δ + B^Δ`, or its averaged form) and the
/// environment part `(1/ε) L^{Δ,E}`.
pub fn apply_hierarchy(
    k: &CorrelationTable,
    model: &LatticeModel,
    variant: Variant,
    options: HierarchyOptions,
) -> Result<CorrelationTable> {
    if k.n_sites() != model.n_sites || (k.site_volume() - model.site_volume).abs() > 1e-15 * model.site_volume {
        return Err(Error::InvalidParameter("table and model live on different site spaces".into()));
    }
    let ctx = Context::new(k, model, variant, options);
    let mut out = k.clone();
    let entries: Vec<(u32, u32)> = k.entries().collect();
    let values = ctx.derivatives(&entries)?;
    for (&(p, m), d) in entries.iter().zip(values) {
        out.set(p, m, d);
    }
    Ok(out)
}

struct Context<'a> {
    k: &'a CorrelationTable,
    model: &'a LatticeModel,
    variant: Variant,
    options: HierarchyOptions,
    ursell: Vec<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(k: &'a CorrelationTable, model: &'a LatticeModel, variant: Variant, options: HierarchyOptions) -> Self {
        let needs_env = matches!(variant, Variant::Joint { .. } | Variant::EnvironmentOnly { .. });
        let ursell = if needs_env { ursell_tables(model) } else { Vec::new() };
        Self { k, model, variant, options, ursell }
    }

    fn derivatives(&self, entries: &[(u32, u32)]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if entries.len() >= 4096 {
                return entries.par_iter().map(|&(p, m)| self.entry(p, m)).collect();
            }
        }
        entries.iter().map(|&(p, m)| self.entry(p, m)).collect()
    }

    fn get(&self, plus: u32, minus: u32) -> Result<f64> {
        lookup(self.k, self.options.closure, plus, minus)
    }

    fn entry(&self, a: u32, b: u32) -> Result<f64> {
        if a == 0 && b == 0 {
            return Ok(0.0);
        }
        let mut d = 0.0;
        match self.variant {
            Variant::Joint { epsilon } => {
                d += self.system_part(a, b, None)?;
                d += epsilon.rate() * self.environment_part(a, b)?;
            }
            Variant::EnvironmentOnly { epsilon } => d += epsilon.rate() * self.environment_part(a, b)?,
            Variant::Averaged { rho } => d += self.system_part(a, b, Some(rho))?,
        }
        Ok(d)
    }

    /// `(A^Δ + B^Δ) k` at `(a, b)`; with `rho` set, the averaged operators.
    fn system_part(&self, a: u32, b: u32, rho: Option<f64>) -> Result<f64> {
        if a == 0 {
            return Ok(0.0);
        }
        let md = self.model;
        let p = &md.params;
        let n = md.n_sites;
        let v = md.site_volume;
        let full = (1u32 << n) - 1;
        let lattice = self.options.exclusion == Exclusion::Lattice;
        let k_ab = self.k.get(a, b);
        let n_plus = a.count_ones() as f64;

        let mut m_eta = (p.m + p.lambda) * n_plus;
        for x in bits(a) {
            m_eta += bits(a & !(1 << x)).map(|y| md.a_minus_at(x, y)).sum::<f64>();
            m_eta += match rho {
                Some(r) => p.g * r * (0..n).map(|y| md.b_minus_at(x, y)).sum::<f64>() * v,
                None => p.g * bits(b).map(|y| md.b_minus_at(x, y)).sum::<f64>(),
            };
        }
        let mut a_part = -m_eta * k_ab;
        for x in bits(a) {
            let inner: f64 = bits(a & !(1 << x)).map(|y| md.a_plus_at(y, x)).sum();
            if inner != 0.0 {
                a_part += inner * self.k.get(a & !(1 << x), b);
            }
        }

        let mut b_part = p.lambda * n_plus * k_ab;
        for x in bits(a) {
            for y in bits(full & !a) {
                let am = md.a_minus_at(x, y);
                if am != 0.0 {
                    b_part -= am * self.get(a | 1 << y, b)? * v;
                }
            }
            if rho.is_none() && p.g != 0.0 {
                for y in bits(full & !b) {
                    let bm = md.b_minus_at(x, y);
                    if bm != 0.0 {
                        b_part -= p.g * bm * self.get(a, b | 1 << y)? * v;
                    }
                }
            }
            let rest = a & !(1 << x);
            let spread = if lattice { full & !a } else { full & !rest };
            for y in bits(spread) {
                let ap = md.a_plus_at(x, y);
                if ap != 0.0 {
                    b_part += ap * self.k.get(rest | 1 << y, b) * v;
                }
            }
        }

        let mut correction = 0.0;
        if lattice {
            for y in bits(a) {
                let inner: f64 = bits(a & !(1 << y)).map(|x| md.a_plus_at(x, y)).sum();
                correction -= v * inner * k_ab;
                for x in bits(full & !a) {
                    let ap = md.a_plus_at(x, y);
                    if ap != 0.0 {
                        correction -= v * v * ap * self.get(a | 1 << x, b)?;
                    }
                }
            }
        }
        Ok(a_part + b_part + correction)
    }

    /// `L^{Δ,E} k` at `(a, b)` (without the `1/ε` factor).
    fn environment_part(&self, a: u32, b: u32) -> Result<f64> {
        if b == 0 {
            return Ok(0.0);
        }
        let md = self.model;
        let n = md.n_sites;
        let v = md.site_volume;
        let z = md.params.z;
        let full = (1u32 << n) - 1;
        let lattice = self.options.exclusion == Exclusion::Lattice;
        let mut d = -(b.count_ones() as f64) * self.k.get(a, b);
        if z == 0.0 {
            return Ok(d);
        }
        for x in bits(b) {
            let rest = b & !(1 << x);
            let boltz = (-md.psi_energy(x, rest)).exp();
            if boltz == 0.0 {
                continue;
            }
            let free = full & !b;
            let table = &self.ursell[x];
            let mut sum = 0.0;
            let mut corr = 0.0;
            for xi in subsets(free) {
                let w = table[xi as usize];
                if w == 0.0 {
                    continue;
                }
                sum += w * self.get(a, rest | xi)?;
                if lattice {
                    corr += w * self.get(a, b | xi)?;
                }
            }
            d += z * boltz * (sum - v * corr);
        }
        Ok(d)
    }
}
