use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{apply_hierarchy, CorrelationTable, HierarchyOptions};
use crate::oracle::{LatticeModel, Variant};

/// Adaptive RK4 (step doubling with local extrapolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, initial_step: 1e-2, min_step: 1e-12 }
    }
}

struct Rhs<'a> {
    model: &'a LatticeModel,
    variant: Variant,
    options: HierarchyOptions,
}

impl Rhs<'_> {
    fn eval(&self, k: &CorrelationTable) -> Result<CorrelationTable> {
        apply_hierarchy(k, self.model, self.variant, self.options)
    }

    fn rk4(&self, k: &CorrelationTable, h: f64) -> Result<CorrelationTable> {
        let k1 = self.eval(k)?;
        let k2 = self.eval(&k.axpby(1.0, &k1, h / 2.0))?;
        let k3 = self.eval(&k.axpby(1.0, &k2, h / 2.0))?;
        let k4 = self.eval(&k.axpby(1.0, &k3, h))?;
        let mut out = k.clone();
        let vals = out.values_mut();
        for i in 0..vals.len() {
            vals[i] += h / 6.0 * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]);
        }
        vals[0] = 1.0;
        Ok(out)
    }
}

/// Integrates `∂k/∂t = L^Δ k` from `k0` (at time 0) and returns the table
/// at each time of the increasing grid. `k(∅) = 1` is held fixed.
pub fn integrate_hierarchy(
    k0: &CorrelationTable,
    model: &LatticeModel,
    variant: Variant,
    options: HierarchyOptions,
    t_grid: &[f64],
    control: StepControl,
) -> Result<Vec<CorrelationTable>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidParameter("time grid must be increasing and start at t >= 0".into()));
    }
    let rhs = Rhs { model, variant, options };
    let mut k = k0.clone();
    k.values_mut()[0] = 1.0;
    let mut t = 0.0;
    let mut h = control.initial_step;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        while t < target {
            let step = h.min(target - t);
            let full = rhs.rk4(&k, step)?;
            let half = rhs.rk4(&rhs.rk4(&k, step / 2.0)?, step / 2.0)?;
            let err = full
                .values()
                .iter()
                .zip(half.values())
                .map(|(a, b)| (a - b).abs() / (control.abs_tol + control.rel_tol * b.abs()))
                .fold(0.0, f64::max)
                / 15.0;
            if err <= 1.0 {
                k = half.axpby(16.0 / 15.0, &full, -1.0 / 15.0);
                k.values_mut()[0] = 1.0;
                t = if target - t <= step { target } else { t + step };
                h = step * (0.9 * err.max(1e-10).powf(-0.2)).min(4.0);
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.1);
                if h < control.min_step * (1.0 + t) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        out.push(k.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{Closure, Exclusion};
    use crate::oracle::fixtures::ring3;
    use crate::oracle::{correlation_from_distribution, evolve_exact, Distribution, Generator, Layout};
    use crate::real::TimeScale;

    #[test]
    fn zero_generator_keeps_table() {
        let mut p = ring3().params;
        p.m = 0.0;
        p.g = 0.0;
        p.a_plus = crate::kernel::Kernel::tophat(1e-300, 0.1, 1).unwrap();
        p.a_minus = crate::kernel::Kernel::zero(1);
        let m = LatticeModel::new(p).unwrap();
        let k0 = CorrelationTable::poisson(3, 1.0, (3, 3), 0.3, 0.5).unwrap();
        let ks = integrate_hierarchy(&k0, &m, Variant::Joint { epsilon: TimeScale::Infinite }, HierarchyOptions::default(), &[1.0, 2.0], StepControl::default()).unwrap();
        assert!(ks[1].max_abs_diff(&k0) < 1e-15);
    }

    #[test]
    fn pure_death_closed_form() {
        let mut p = ring3().params;
        p.m = 0.9;
        p.g = 0.0;
        p.a_plus = crate::kernel::Kernel::tophat(1e-300, 0.1, 1).unwrap();
        p.a_minus = crate::kernel::Kernel::zero(1);
        let m = LatticeModel::new(p).unwrap();
        let k0 = CorrelationTable::poisson(3, 1.0, (3, 0), 0.4, 0.0).unwrap();
        let ks = integrate_hierarchy(&k0, &m, Variant::Averaged { rho: 0.0 }, HierarchyOptions::default(), &[0.5, 1.5], StepControl::default()).unwrap();
        for (k, t) in ks.iter().zip([0.5, 1.5]) {
            for (pl, _) in k.entries() {
                let n = pl.count_ones() as i32;
                let expect = 0.4f64.powi(n) * (-0.9 * n as f64 * t).exp();
                assert!((k.get(pl, 0) - expect).abs() < 1e-7 * expect);
            }
        }
    }

    #[test]
    fn full_order_matches_oracle() {
        let m = ring3();
        let variant = Variant::Joint { epsilon: TimeScale::Finite(0.3) };
        let p0 = Distribution::product_bernoulli(3, Layout::Joint, &[0.6, 0.3, 0.8], &[0.2, 0.5, 0.4]).unwrap();
        let k0 = correlation_from_distribution(&p0, 1.0, (3, 3)).unwrap();
        let opts = HierarchyOptions { closure: Closure::TruncateZero, exclusion: Exclusion::Lattice };
        let ks = integrate_hierarchy(&k0, &m, variant, opts, &[1.0], StepControl::default()).unwrap();
        let exact = evolve_exact(&Generator::new(&m, variant).unwrap(), &p0, 1.0).unwrap();
        let k_exact = correlation_from_distribution(&exact, 1.0, (3, 3)).unwrap();
        assert!(ks[0].max_abs_diff(&k_exact) < 1e-6);
    }
}
