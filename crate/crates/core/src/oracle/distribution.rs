use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::CorrelationTable;
use crate::oracle::generator::{Generator, Layout};
use crate::oracle::model::{bits, LatticeModel};

/// Largest chain evolved through a dense matrix exponential.
pub const MAX_DENSE_STATES: usize = 256;

/// Law of the lattice chain at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n_sites: usize,
    pub layout: Layout,
    pub probs: Vec<f64>,
    pub t: f64,
}

impl Distribution {
    /// Dirac mass at the configuration `(plus, minus)`.
    pub fn point(n_sites: usize, layout: Layout, plus: u32, minus: u32) -> Result<Self> {
        let mut probs = vec![0.0; layout.n_states(n_sites)];
        let s = layout
            .join(n_sites, plus, minus)
            .filter(|&s| s < probs.len())
            .ok_or_else(|| Error::InvalidParameter("configuration does not fit the layout".into()))?;
        probs[s] = 1.0;
        Ok(Self { n_sites, layout, probs, t: 0.0 })
    }

    /// Independent Bernoulli occupation with per-site probabilities; the
    /// slice for a sort absent from the layout is ignored.
    pub fn product_bernoulli(n_sites: usize, layout: Layout, p_plus: &[f64], p_minus: &[f64]) -> Result<Self> {
        let check = |p: &[f64]| p.len() == n_sites && p.iter().all(|x| (0.0..=1.0).contains(x));
        let need_plus = layout != Layout::Minus;
        let need_minus = layout != Layout::Plus;
        if (need_plus && !check(p_plus)) || (need_minus && !check(p_minus)) {
            return Err(Error::InvalidParameter("need one probability in [0, 1] per site".into()));
        }
        let weight = |mask: u32, p: &[f64]| -> f64 {
            (0..n_sites).map(|i| if mask >> i & 1 == 1 { p[i] } else { 1.0 - p[i] }).product()
        };
        let probs = (0..layout.n_states(n_sites))
            .map(|s| {
                let (pl, mi) = layout.split(n_sites, s);
                let a = if need_plus { weight(pl, p_plus) } else { 1.0 };
                let b = if need_minus { weight(mi, p_minus) } else { 1.0 };
                a * b
            })
            .collect();
        Ok(Self { n_sites, layout, probs, t: 0.0 })
    }

    /// Product of a `+`-only law and a `−`-only law.
    pub fn independent(plus: &Distribution, minus: &Distribution) -> Result<Self> {
        if plus.layout != Layout::Plus || minus.layout != Layout::Minus || plus.n_sites != minus.n_sites {
            return Err(Error::InvalidParameter("independent() needs a + law and a − law on the same sites".into()));
        }
        let n = plus.n_sites;
        let mut probs = vec![0.0; Layout::Joint.n_states(n)];
        for (m, pm) in minus.probs.iter().enumerate() {
            for (p, pp) in plus.probs.iter().enumerate() {
                probs[p | m << n] = pp * pm;
            }
        }
        Ok(Self { n_sites: n, layout: Layout::Joint, probs, t: plus.t })
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `E[F(γ⁺, γ⁻)]`.
    pub fn expect(&self, f: impl Fn(u32, u32) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != 0.0)
            .map(|(s, p)| {
                let (pl, mi) = self.layout.split(self.n_sites, s);
                p * f(pl, mi)
            })
            .sum()
    }

    pub fn mean_plus_count(&self) -> f64 {
        self.expect(|p, _| p.count_ones() as f64)
    }

    pub fn mean_minus_count(&self) -> f64 {
        self.expect(|_, m| m.count_ones() as f64)
    }

    fn marginal(&self, layout: Layout, pick: impl Fn(u32, u32) -> u32) -> Distribution {
        let mut probs = vec![0.0; layout.n_states(self.n_sites)];
        for (s, p) in self.probs.iter().enumerate() {
            let (pl, mi) = self.layout.split(self.n_sites, s);
            probs[pick(pl, mi) as usize] += p;
        }
        Distribution { n_sites: self.n_sites, layout, probs, t: self.t }
    }

    pub fn plus_marginal(&self) -> Distribution {
        self.marginal(Layout::Plus, |p, _| p)
    }

    pub fn minus_marginal(&self) -> Distribution {
        self.marginal(Layout::Minus, |_, m| m)
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    fn clamp(&mut self) {
        for p in self.probs.iter_mut() {
            if *p < 0.0 && *p > -1e-12 {
                *p = 0.0;
            }
        }
    }
}

fn check_compatible(gen: &Generator, d: &Distribution) -> Result<()> {
    if d.layout != gen.layout() || d.n_sites != gen.model().n_sites {
        return Err(Error::InvalidParameter("distribution does not match the generator's state space".into()));
    }
    Ok(())
}

/// Transient law after time `t`: dense exponential for chains of at most
/// [`MAX_DENSE_STATES`] states, uniformization beyond.
pub fn evolve_exact(gen: &Generator, initial: &Distribution, t: f64) -> Result<Distribution> {
    if gen.n_states() <= MAX_DENSE_STATES {
        evolve_dense(gen, initial, t)
    } else {
        evolve_uniformized(gen, initial, t)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("evolution time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `p(t) = exp(t Qᵀ) p(0)` via a dense matrix exponential.
pub fn evolve_dense(gen: &Generator, initial: &Distribution, t: f64) -> Result<Distribution> {
    check_compatible(gen, initial)?;
    check_time(t)?;
    let n = gen.n_states();
    if n > MAX_DENSE_STATES {
        return Err(Error::StateSpaceTooLarge {
            sites: gen.model().n_sites,
            states: n as u64,
            limit: MAX_DENSE_STATES as u64,
        });
    }
    let mut qt = DMatrix::<f64>::zeros(n, n);
    for (i, j, r) in gen.triplets()? {
        if !r.is_finite() {
            return Err(Error::NonFiniteRate(format!("rate {i} -> {j}")));
        }
        qt[(j, i)] += r * t;
    }
    let p = qt.exp() * DVector::from_column_slice(&initial.probs);
    let mut out = Distribution { probs: p.as_slice().to_vec(), t: initial.t + t, ..initial.clone() };
    out.clamp();
    Ok(out)
}

/// Uniformization: `p(t) = Σ_k Poisson(k; qt) (I + Qᵀ/q)^k p(0)`, split into
/// chunks with `q·dt ≤ 30` and each Poisson tail truncated below `1e-14`.
pub fn evolve_uniformized(gen: &Generator, initial: &Distribution, t: f64) -> Result<Distribution> {
    check_compatible(gen, initial)?;
    check_time(t)?;
    let q = gen.max_exit_rate();
    if !q.is_finite() {
        return Err(Error::NonFiniteRate("exit rate".into()));
    }
    let mut p = initial.probs.clone();
    if q > 0.0 && t > 0.0 {
        let chunks = (q * t / 30.0).ceil().max(1.0) as usize;
        let lam = q * t / chunks as f64;
        let kmax = (lam + 12.0 * lam.sqrt() + 40.0) as usize;
        let mut term = vec![0.0; p.len()];
        let mut flux = vec![0.0; p.len()];
        let mut acc = vec![0.0; p.len()];
        for _ in 0..chunks {
            term.copy_from_slice(&p);
            let mut w = (-lam).exp();
            let mut cum = w;
            acc.iter_mut().zip(&term).for_each(|(a, x)| *a = w * x);
            let mut k = 0;
            while cum < 1.0 - 1e-14 && k < kmax {
                gen.apply_transpose(&term, &mut flux);
                term.iter_mut().zip(&flux).for_each(|(x, f)| *x += f / q);
                k += 1;
                w *= lam / k as f64;
                cum += w;
                acc.iter_mut().zip(&term).for_each(|(a, x)| *a += w * x);
            }
            p.copy_from_slice(&acc);
        }
    }
    let mut out = Distribution { probs: p, t: initial.t + t, ..initial.clone() };
    out.clamp();
    Ok(out)
}

/// Laws at every time of an increasing grid starting from `initial.t`.
pub fn evolve_grid(gen: &Generator, initial: &Distribution, t_grid: &[f64]) -> Result<Vec<Distribution>> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut cur = initial.clone();
    for &t in t_grid {
        let dt = t - cur.t;
        if dt < -1e-12 {
            return Err(Error::InvalidParameter("time grid must be increasing".into()));
        }
        cur = evolve_exact(gen, &cur, dt.max(0.0))?;
        cur.t = t;
        out.push(cur.clone());
    }
    Ok(out)
}

/// `k(η⁺, η⁻) = P(η⁺ ⊆ γ⁺, η⁻ ⊆ γ⁻) / v^{|η|}` for all orders up to
/// `max_order`.
pub fn correlation_from_distribution(
    dist: &Distribution,
    site_volume: f64,
    max_order: (usize, usize),
) -> Result<CorrelationTable> {
    let n = dist.n_sites;
    let mut table = CorrelationTable::new(n, site_volume, max_order.0, max_order.1)?;
    let mut f = vec![0.0; 1 << (2 * n)];
    for (s, p) in dist.probs.iter().enumerate() {
        let (pl, mi) = dist.layout.split(n, s);
        f[pl as usize | (mi as usize) << n] += p;
    }
    for b in 0..2 * n {
        let bit = 1usize << b;
        for s in 0..f.len() {
            if s & bit == 0 {
                f[s] += f[s | bit];
            }
        }
    }
    for (pl, mi) in table.entries().collect::<Vec<_>>() {
        let k = (pl.count_ones() + mi.count_ones()) as i32;
        table.set(pl, mi, f[pl as usize | (mi as usize) << n] / site_volume.powi(k));
    }
    table.set(0, 0, 1.0);
    Ok(table)
}

/// Largest site count for enumerating the environment's Gibbs measure.
pub const MAX_GIBBS_SITES: usize = 20;

/// Finite-volume Gibbs law of the environment, weight
/// `(zv)^{|η⁻|} exp(−Σ_{pairs} Ψ)`.
pub fn gibbs_distribution(model: &LatticeModel) -> Result<Distribution> {
    let n = model.n_sites;
    if n > MAX_GIBBS_SITES {
        return Err(Error::StateSpaceTooLarge {
            sites: n,
            states: 1 << n,
            limit: 1 << MAX_GIBBS_SITES,
        });
    }
    let zv = model.params.z * model.site_volume;
    let mut probs: Vec<f64> = (0..1u32 << n)
        .map(|mask| {
            let pair: f64 = bits(mask).map(|x| model.psi_energy(x, mask & ((1 << x) - 1))).sum();
            zv.powi(mask.count_ones() as i32) * (-pair).exp()
        })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Distribution { n_sites: n, layout: Layout::Minus, probs, t: 0.0 })
}

/// Per-site density `k(∅, {x})` of the environment's Gibbs measure.
pub fn gibbs_density(model: &LatticeModel) -> Result<Vec<f64>> {
    let d = gibbs_distribution(model)?;
    let v = model.site_volume;
    Ok((0..model.n_sites).map(|x| d.expect(|_, m| (m >> x & 1) as f64) / v).collect())
}

/// Site average of [`gibbs_density`], the `ρ` used by the averaged chain.
pub fn gibbs_mean_density(model: &LatticeModel) -> Result<f64> {
    let rho = gibbs_density(model)?;
    Ok(rho.iter().sum::<f64>() / rho.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::kernel::Kernel;
    use crate::oracle::generator::Variant;
    use crate::oracle::model::fixtures::ring3;
    use crate::params::fixtures::torus_model;
    use crate::params::ModelParams;
    use crate::real::TimeScale;

    fn env_model(n: usize, v: f64, psi: Kernel) -> LatticeModel {
        LatticeModel::new(ModelParams { geometry: Geometry::ring(n, v), psi, ..torus_model(1.0) }).unwrap()
    }

    #[test]
    fn pure_death_survival() {
        let mut m = env_model(1, 1.0, Kernel::zero(1));
        m.params.m = 0.7;
        m.params.g = 0.0;
        let g = Generator::new(&m, Variant::Averaged { rho: 0.0 }).unwrap();
        let p0 = Distribution::point(1, Layout::Plus, 1, 0).unwrap();
        for t in [0.0, 0.5, 2.0, 7.0] {
            for d in [evolve_dense(&g, &p0, t).unwrap(), evolve_uniformized(&g, &p0, t).unwrap()] {
                assert!((d.probs[1] - (-0.7 * t).exp()).abs() < 1e-8);
            }
        }
        assert_eq!(evolve_exact(&g, &p0, 0.0).unwrap().probs, p0.probs);
    }

    #[test]
    fn environment_relaxation_closed_form() {
        let (z, v, eps) = (1.0, 0.5, 0.4);
        let m = env_model(3, v, Kernel::zero(1));
        let g = Generator::new(&m, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(eps) }).unwrap();
        let p0 = Distribution::point(3, Layout::Minus, 0, 0b001).unwrap();
        let stat = z * v / (1.0 + z * v);
        let rate = (1.0 + z * v) / eps;
        for t in [0.1, 0.5, 1.5] {
            let d = evolve_exact(&g, &p0, t).unwrap();
            let occ = |x: u32, init: f64| {
                let e = d.expect(|_, mi| (mi >> x & 1) as f64);
                (e - (stat + (init - stat) * (-rate * t).exp())).abs()
            };
            assert!(occ(0, 1.0) < 1e-10);
            assert!(occ(1, 0.0) < 1e-10);
        }
    }

    #[test]
    fn dense_and_uniformized_agree() {
        let m = ring3();
        let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Finite(0.3) }).unwrap();
        let p0 = Distribution::product_bernoulli(3, Layout::Joint, &[0.5, 0.2, 0.9], &[0.3, 0.3, 0.6]).unwrap();
        for t in [0.3, 2.0, 20.0] {
            let a = evolve_dense(&g, &p0, t).unwrap();
            let b = evolve_uniformized(&g, &p0, t).unwrap();
            assert!(a.total_variation(&b) < 1e-9, "t={t}");
            assert!((a.mass() - 1.0).abs() < 1e-9 && (b.mass() - 1.0).abs() < 1e-9);
            assert!(a.probs.iter().chain(&b.probs).all(|p| *p >= -1e-12));
        }
    }

    #[test]
    fn larger_chain_conserves_mass() {
        let mut p = torus_model(1.0);
        p.geometry = Geometry::ring(5, 0.6);
        let m = LatticeModel::new(p).unwrap();
        let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Finite(0.5) }).unwrap();
        let p0 = Distribution::point(5, Layout::Joint, 0b10101, 0).unwrap();
        let d = evolve_exact(&g, &p0, 3.0).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-9);
        assert!(d.probs.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn absorbing_empty_state_without_activity() {
        let mut m = ring3();
        m.params.z = 0.0;
        let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Finite(0.3) }).unwrap();
        let p0 = Distribution::point(3, Layout::Joint, 0, 0).unwrap();
        assert!((evolve_exact(&g, &p0, 4.0).unwrap().probs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_of_product_bernoulli() {
        let (p, v) = (0.3, 0.5);
        let d = Distribution::product_bernoulli(3, Layout::Plus, &[p; 3], &[]).unwrap();
        let k = correlation_from_distribution(&d, v, (3, 0)).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert!((k.get(0b010, 0) - p / v).abs() < 1e-14);
        assert!((k.get(0b101, 0) - p * p / (v * v)).abs() < 1e-14);
        assert!(correlation_from_distribution(&d, v, (4, 0)).is_err());
    }

    #[test]
    fn environment_gibbs_density() {
        let (z, v) = (1.0, 0.02);
        let m = env_model(4, v, Kernel::zero(1));
        let rho = gibbs_density(&m).unwrap();
        for r in &rho {
            assert!((r - z / (1.0 + z * v)).abs() < 1e-12);
            assert!((r - z).abs() < 0.02 * z);
        }
        let env = correlation_from_distribution(&gibbs_distribution(&m).unwrap(), v, (0, 1)).unwrap();
        assert!((env.get(0, 0b100) - rho[2]).abs() < 1e-12);
        let mut cold = env_model(4, v, Kernel::zero(1));
        cold.params.z = 1e-9;
        assert!(gibbs_mean_density(&cold).unwrap() < 1e-8);
    }

    #[test]
    fn hard_core_repels() {
        let hard = Kernel::tophat(f64::INFINITY, 1.5, 1).unwrap();
        let free = gibbs_mean_density(&env_model(2, 1.0, Kernel::zero(1))).unwrap();
        let rep = gibbs_mean_density(&env_model(2, 1.0, hard)).unwrap();
        assert!(rep < free);
        assert!((rep - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_is_stationary_for_environment() {
        let psi = Kernel::tophat(0.8, 1.5, 1).unwrap();
        let m = env_model(4, 0.7, psi);
        let g = Generator::new(&m, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(0.2) }).unwrap();
        let pi = gibbs_distribution(&m).unwrap();
        let mut res = vec![0.0; pi.probs.len()];
        g.apply_transpose(&pi.probs, &mut res);
        assert!(res.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn uncoupled_environment_marginal() {
        let mut m = ring3();
        m.params.g = 0.0;
        let eps = TimeScale::Finite(0.3);
        let joint = Generator::new(&m, Variant::Joint { epsilon: eps }).unwrap();
        let env = Generator::new(&m, Variant::EnvironmentOnly { epsilon: eps }).unwrap();
        let plus = Distribution::product_bernoulli(3, Layout::Plus, &[0.4, 0.6, 0.1], &[]).unwrap();
        let minus = Distribution::product_bernoulli(3, Layout::Minus, &[], &[0.2, 0.9, 0.5]).unwrap();
        let p0 = Distribution::independent(&plus, &minus).unwrap();
        let a = evolve_exact(&joint, &p0, 1.3).unwrap().minus_marginal();
        let b = evolve_exact(&env, &minus, 1.3).unwrap();
        assert!(a.total_variation(&b) < 1e-9);
    }

    #[test]
    fn mortality_monotonicity() {
        let p0 = Distribution::point(3, Layout::Joint, 0b111, 0b010).unwrap();
        let means: Vec<Vec<f64>> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&mort| {
                let mut m = ring3();
                m.params.m = mort;
                let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Finite(0.3) }).unwrap();
                evolve_grid(&g, &p0, &[0.5, 1.0, 2.0, 4.0]).unwrap().iter().map(|d| d.mean_plus_count()).collect()
            })
            .collect();
        for t in 0..4 {
            assert!(means[0][t] > means[1][t] && means[1][t] > means[2][t]);
        }
    }
}
