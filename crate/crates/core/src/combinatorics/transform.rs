use rand::Rng;

use crate::combinatorics::FiniteConfig;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};

/// Largest site space on which two-sort set functions are tabulated
/// (`4^n` entries).
pub const MAX_LP_SITES: usize = 10;

/// A bounded two-sort set function on the subsets of `n_sites` sites,
/// tabulated at index `plus_mask | minus_mask << n_sites`. Entries with
/// `|η⁺| + |η⁻| > support` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    n_sites: usize,
    support: usize,
    values: Vec<f64>,
}

impl SetFunction {
    pub fn from_fn(n_sites: usize, support: usize, mut f: impl FnMut(u32, u32) -> f64) -> Result<Self> {
        if n_sites > MAX_LP_SITES {
            return Err(too_large(n_sites));
        }
        let full = 1usize << n_sites;
        let mut values = vec![0.0; full * full];
        for minus in 0..full as u32 {
            for plus in 0..full as u32 {
                if (plus.count_ones() + minus.count_ones()) as usize <= support {
                    values[plus as usize | (minus as usize) << n_sites] = f(plus, minus);
                }
            }
        }
        Ok(Self { n_sites, support, values })
    }

    /// A function of the `+` sort only (zero whenever `η⁻ ≠ ∅`).
    pub fn single_sort(n_sites: usize, support: usize, mut f: impl FnMut(u32) -> f64) -> Result<Self> {
        Self::from_fn(n_sites, support, |p, m| if m == 0 { f(p) } else { 0.0 })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn get(&self, plus: u32, minus: u32) -> f64 {
        self.values[plus as usize | (minus as usize) << self.n_sites]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_bound(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn linear_combination(&self, a: f64, other: &SetFunction, b: f64) -> SetFunction {
        assert_eq!(self.n_sites, other.n_sites);
        SetFunction {
            n_sites: self.n_sites,
            support: self.support.max(other.support),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// `(KG)` tabulated at every configuration (subset-sum transform over
    /// the combined `2n`-bit mask).
    pub fn k_transform_table(&self) -> SetFunction {
        let mut v = self.values.clone();
        let bits = 2 * self.n_sites;
        for b in 0..bits {
            let bit = 1usize << b;
            for s in 0..v.len() {
                if s & bit != 0 {
                    v[s] += v[s ^ bit];
                }
            }
        }
        SetFunction { n_sites: self.n_sites, support: 2 * self.n_sites, values: v }
    }
}

fn too_large(n: usize) -> Error {
    Error::StateSpaceTooLarge { sites: n, states: 4u64.saturating_pow(n as u32), limit: 4u64.pow(MAX_LP_SITES as u32) }
}

/// All submasks of `mask`, including `0` and `mask` itself.
pub fn subsets(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

/// `(KG)(γ) = Σ_{ξ⁺⊆γ⁺, ξ⁻⊆γ⁻} G(ξ⁺, ξ⁻)`.
pub fn k_transform(g: &SetFunction, gamma: &FiniteConfig<usize>) -> f64 {
    let (p, m) = gamma.masks();
    let n = g.support as u32;
    let mut acc = 0.0;
    for xp in subsets(p).filter(|s| s.count_ones() <= n) {
        for xm in subsets(m).filter(|s| s.count_ones() + xp.count_ones() <= n) {
            acc += g.get(xp, xm);
        }
    }
    acc
}

/// K-transform of an arbitrary evaluator with support bound `support` on a
/// configuration of continuum points.
pub fn k_transform_config<P: Ord + Clone>(
    g: impl Fn(&FiniteConfig<P>) -> f64,
    support: usize,
    gamma: &FiniteConfig<P>,
) -> f64 {
    let (np, nm) = (gamma.plus.len(), gamma.minus.len());
    assert!(np < 32 && nm < 32, "configuration too large for subset enumeration");
    let pick = |v: &[P], mask: u32| -> Vec<P> {
        v.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p.clone()).collect()
    };
    let mut acc = 0.0;
    for xp in subsets(((1u64 << np) - 1) as u32) {
        if xp.count_ones() as usize > support {
            continue;
        }
        for xm in subsets(((1u64 << nm) - 1) as u32) {
            if (xp.count_ones() + xm.count_ones()) as usize > support {
                continue;
            }
            let xi = FiniteConfig { plus: pick(&gamma.plus, xp), minus: pick(&gamma.minus, xm) };
            acc += g(&xi);
        }
    }
    acc
}

/// Inverse of the K-transform: `G(η) = Σ_{ξ⊆η} (−1)^{|η∖ξ|} F(ξ)`.
pub fn mobius_inverse(f: &SetFunction) -> SetFunction {
    let mut v = f.values.clone();
    let bits = 2 * f.n_sites;
    for b in 0..bits {
        let bit = 1usize << b;
        for s in 0..v.len() {
            if s & bit != 0 {
                v[s] -= v[s ^ bit];
            }
        }
    }
    SetFunction { n_sites: f.n_sites, support: 2 * f.n_sites, values: v }
}

fn weight(mask: u32, w: &[f64]) -> f64 {
    (0..w.len()).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).product()
}

/// Lebesgue–Poisson integral on a finite site space:
/// `Σ_{η⁺,η⁻} G(η⁺, η⁻) Π_{x∈η⁺} w(x) Π_{y∈η⁻} w(y)`.
pub fn lp_integral(g: &SetFunction, site_weights: &[f64]) -> Result<f64> {
    let n = g.n_sites;
    if site_weights.len() != n {
        return Err(Error::InvalidParameter(format!("{} weights for {n} sites", site_weights.len())));
    }
    let full = 1u32 << n;
    let w: Vec<f64> = (0..full).map(|s| weight(s, site_weights)).collect();
    let mut acc = 0.0;
    for m in 0..full {
        let mut row = 0.0;
        for p in 0..full {
            row += g.get(p, m) * w[p as usize];
        }
        acc += row * w[m as usize];
    }
    Ok(acc)
}

/// Single-sort Lebesgue–Poisson integral of an evaluator on subsets of
/// `site_weights.len()` sites.
pub fn lp_integral_single(g: impl Fn(u32) -> f64, site_weights: &[f64]) -> Result<f64> {
    let n = site_weights.len();
    if n > 2 * MAX_LP_SITES {
        return Err(too_large(n));
    }
    Ok((0..1u32 << n).map(|s| g(s) * weight(s, site_weights)).sum())
}

fn neumaier(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        c += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
    }
    sum + c
}

/// Both sides of the combinatorial integration-by-parts identity for
/// single-sort configurations on a finite site space:
/// `∫ Σ_{ξ⊆η} G(ξ, η∖ξ, η) dλ(η)` and `∫∫ G(ξ, η, η∪ξ) dλ(ξ) dλ(η)`.
/// Pairs with `ξ ∩ η ≠ ∅` are λ⊗λ-null and do not enter the right side.
pub fn ibp_sides(g: &impl Fn(u32, u32, u32) -> f64, site_weights: &[f64]) -> Result<(f64, f64)> {
    let n = site_weights.len();
    if n > 2 * MAX_LP_SITES {
        return Err(too_large(n));
    }
    let full = 1u32 << n;
    let w: Vec<f64> = (0..full).map(|s| weight(s, site_weights)).collect();
    let lhs = neumaier((0..full).flat_map(|eta| {
        let w = &w;
        subsets(eta).map(move |xi| g(xi, eta & !xi, eta) * w[eta as usize])
    }));
    let rhs = neumaier((0..full).flat_map(|xi| {
        let w = &w;
        subsets(!xi & (full - 1)).map(move |eta| g(xi, eta, eta | xi) * w[xi as usize] * w[eta as usize])
    }));
    Ok((lhs, rhs))
}

/// Maximum `|lhs − rhs|` of the integration-by-parts identity over the given
/// weights and `trials − 1` further weight vectors drawn uniformly from
/// `(0, max w]`.
pub fn ibp_check(g: impl Fn(u32, u32, u32) -> f64, site_weights: &[f64], trials: usize, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, StreamTag::Analysis, 0);
    let top = site_weights.iter().fold(0.0f64, |a, &b| a.max(b)).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut w = site_weights.to_vec();
    for trial in 0..trials.max(1) {
        if trial > 0 {
            for wi in w.iter_mut() {
                *wi = top * (1.0 - rng.random::<f64>());
            }
        }
        let (l, r) = ibp_sides(&g, &w)?;
        worst = worst.max((l - r).abs());
    }
    Ok(worst)
}
