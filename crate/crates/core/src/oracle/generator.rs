use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::model::{bits, LatticeModel};
use crate::real::TimeScale;

/// Which dynamics the chain realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    /// `L^S + (1/ε) L^E` on both sorts.
    Joint { epsilon: TimeScale },
    /// `(1/ε) L^E` on the `−` sort alone.
    EnvironmentOnly { epsilon: TimeScale },
    /// The averaged `+` dynamics with death rate `m + gρ + Σ a⁻`.
    Averaged { rho: f64 },
}

/// How a state index splits into site masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `plus | minus << n`, `4^n` states.
    Joint,
    /// `+` sort only, `2^n` states.
    Plus,
    /// `−` sort only, `2^n` states.
    Minus,
}

impl Layout {
    pub fn n_states(self, n_sites: usize) -> usize {
        match self {
            Layout::Joint => 1 << (2 * n_sites),
            Layout::Plus | Layout::Minus => 1 << n_sites,
        }
    }

    pub fn split(self, n_sites: usize, s: usize) -> (u32, u32) {
        match self {
            Layout::Joint => ((s & ((1 << n_sites) - 1)) as u32, (s >> n_sites) as u32),
            Layout::Plus => (s as u32, 0),
            Layout::Minus => (0, s as u32),
        }
    }

    /// Inverse of [`Layout::split`]; `None` when the layout cannot hold the
    /// configuration.
    pub fn join(self, n_sites: usize, plus: u32, minus: u32) -> Option<usize> {
        match self {
            Layout::Joint => Some(plus as usize | (minus as usize) << n_sites),
            Layout::Plus => (minus == 0).then_some(plus as usize),
            Layout::Minus => (plus == 0).then_some(minus as usize),
        }
    }
}

/// Largest chain exported as an explicit sparse matrix.
pub const MAX_EXPLICIT_STATES: usize = 1 << 16;

/// Matrix-free rate matrix of the lattice chain. Each site holds at most one
/// particle per sort; births onto an occupied site are not possible.
#[derive(Debug, Clone)]
pub struct Generator {
    model: LatticeModel,
    variant: Variant,
}

impl Generator {
    pub fn new(model: &LatticeModel, variant: Variant) -> Result<Self> {
        if let Variant::Averaged { rho } = variant {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::NonFiniteRate(format!("averaged density {rho}")));
            }
        }
        let layout = layout_of(variant);
        if layout == Layout::Joint && model.n_sites > super::model::MAX_ORACLE_SITES {
            return Err(Error::StateSpaceTooLarge {
                sites: model.n_sites,
                states: 4u64.saturating_pow(model.n_sites as u32),
                limit: 1 << 24,
            });
        }
        Ok(Self { model: model.clone(), variant })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn layout(&self) -> Layout {
        layout_of(self.variant)
    }

    pub fn n_states(&self) -> usize {
        self.layout().n_states(self.model.n_sites)
    }

    /// Calls `f(target, rate)` for every positive-rate jump out of state `s`.
    pub fn transitions(&self, s: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.model.n_sites;
        let layout = self.layout();
        let (plus, minus) = layout.split(n, s);
        let full = (1u32 << n) - 1;
        let md = &self.model;
        let p = &md.params;
        let v = md.site_volume;
        let (plus_moves, env_rate) = match self.variant {
            Variant::Joint { epsilon } => (true, epsilon.rate()),
            Variant::EnvironmentOnly { epsilon } => (false, epsilon.rate()),
            Variant::Averaged { .. } => (true, 0.0),
        };
        let jump = |pl: u32, mi: u32| layout.join(n, pl, mi).expect("layout holds state");
        if plus_moves {
            for x in bits(plus) {
                let mut rate = p.m;
                rate += bits(plus & !(1 << x)).map(|y| md.a_minus_at(x, y)).sum::<f64>();
                rate += match self.variant {
                    Variant::Averaged { rho } => p.g * rho * (0..n).map(|y| md.b_minus_at(x, y)).sum::<f64>() * v,
                    _ => p.g * bits(minus).map(|y| md.b_minus_at(x, y)).sum::<f64>(),
                };
                if rate > 0.0 {
                    f(jump(plus & !(1 << x), minus), rate);
                }
            }
            for y in bits(full & !plus) {
                let rate = bits(plus).map(|x| md.a_plus_at(x, y)).sum::<f64>() * v;
                if rate > 0.0 {
                    f(jump(plus | 1 << y, minus), rate);
                }
            }
        }
        if env_rate > 0.0 {
            for x in bits(minus) {
                f(jump(plus, minus & !(1 << x)), env_rate);
            }
            if p.z > 0.0 {
                for x in bits(full & !minus) {
                    let rate = env_rate * p.z * v * (-md.psi_energy(x, minus)).exp();
                    if rate > 0.0 {
                        f(jump(plus, minus | 1 << x), rate);
                    }
                }
            }
        }
    }

    pub fn exit_rate(&self, s: usize) -> f64 {
        let mut total = 0.0;
        self.transitions(s, |_, r| total += r);
        total
    }

    /// An upper bound on the exit rates: exact maximum for explicit-sized
    /// chains, a sitewise bound otherwise.
    pub fn max_exit_rate(&self) -> f64 {
        if self.n_states() <= MAX_EXPLICIT_STATES {
            return (0..self.n_states()).map(|s| self.exit_rate(s)).fold(0.0, f64::max);
        }
        let md = &self.model;
        let n = md.n_sites;
        let p = &md.params;
        let v = md.site_volume;
        let (plus_moves, env_rate, rho) = match self.variant {
            Variant::Joint { epsilon } => (true, epsilon.rate(), None),
            Variant::EnvironmentOnly { epsilon } => (false, epsilon.rate(), None),
            Variant::Averaged { rho } => (true, 0.0, Some(rho)),
        };
        let mut q = 0.0;
        if plus_moves {
            for x in 0..n {
                let am: f64 = (0..n).filter(|&y| y != x).map(|y| md.a_minus_at(x, y)).sum();
                let bm: f64 = (0..n).map(|y| md.b_minus_at(x, y)).sum();
                let ap: f64 = (0..n).filter(|&y| y != x).map(|y| md.a_plus_at(y, x)).sum();
                q += p.m + am + ap * v + p.g * rho.map_or(bm, |r| r * bm * v);
            }
        }
        q + n as f64 * env_rate * (1.0 + p.z * v)
    }

    /// Outgoing-flux form of the forward equation: `(Qᵀ p)`.
    pub fn apply_transpose(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &ps) in p.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            let mut exit = 0.0;
            self.transitions(s, |t, r| {
                out[t] += ps * r;
                exit += r;
            });
            out[s] -= ps * exit;
        }
    }

    /// Explicit entries `(row, col, rate)` including the diagonal.
    pub fn triplets(&self) -> Result<Vec<(usize, usize, f64)>> {
        let n = self.n_states();
        if n > MAX_EXPLICIT_STATES {
            return Err(Error::StateSpaceTooLarge {
                sites: self.model.n_sites,
                states: n as u64,
                limit: MAX_EXPLICIT_STATES as u64,
            });
        }
        let mut out = Vec::new();
        for s in 0..n {
            let mut exit = 0.0;
            self.transitions(s, |t, r| {
                out.push((s, t, r));
                exit += r;
            });
            out.push((s, s, -exit));
        }
        Ok(out)
    }

    /// Writes the rate matrix in Matrix Market coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let t = self.triplets()?;
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_states(), self.n_states(), t.len())?;
        for (i, j, r) in t {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, r)?;
        }
        Ok(())
    }
}

fn layout_of(variant: Variant) -> Layout {
    match variant {
        Variant::Joint { .. } => Layout::Joint,
        Variant::EnvironmentOnly { .. } => Layout::Minus,
        Variant::Averaged { .. } => Layout::Plus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::kernel::Kernel;
    use crate::oracle::model::fixtures::ring3;
    use crate::params::fixtures::torus_model;
    use crate::params::ModelParams;

    fn one_site(v: f64) -> LatticeModel {
        LatticeModel::new(ModelParams { geometry: Geometry::ring(1, v), ..torus_model(1.0) }).unwrap()
    }

    #[test]
    fn rows_sum_to_zero_and_offdiagonals_nonnegative() {
        let m = ring3();
        for variant in [
            Variant::Joint { epsilon: TimeScale::Finite(0.3) },
            Variant::EnvironmentOnly { epsilon: TimeScale::Finite(0.3) },
            Variant::Averaged { rho: 0.4 },
        ] {
            let g = Generator::new(&m, variant).unwrap();
            let mut rows = vec![0.0; g.n_states()];
            for (i, j, r) in g.triplets().unwrap() {
                if i != j {
                    assert!(r > 0.0);
                }
                rows[i] += r;
            }
            assert!(rows.iter().all(|r| r.abs() < 1e-12));
            let q = g.max_exit_rate();
            assert!((0..g.n_states()).all(|s| g.exit_rate(s) <= q));
        }
    }

    #[test]
    fn one_site_environment_two_state_chain() {
        let v = 0.5;
        let mut m = one_site(v);
        m.params.psi = Kernel::zero(1);
        let g = Generator::new(&m, Variant::EnvironmentOnly { epsilon: TimeScale::Finite(1.0) }).unwrap();
        let t = g.triplets().unwrap();
        assert!(t.contains(&(0, 1, m.params.z * v)));
        assert!(t.contains(&(1, 0, 1.0)));
        assert_eq!(g.n_states(), 2);
    }

    #[test]
    fn one_site_averaged_by_hand() {
        let m = one_site(1.0);
        let rho = 0.7;
        let g = Generator::new(&m, Variant::Averaged { rho }).unwrap();
        let t = g.triplets().unwrap();
        let down = m.params.m + m.params.g * rho;
        let expect = vec![(0, 0, 0.0), (1, 0, down), (1, 1, -down)];
        assert_eq!(t.len(), 3);
        for (a, b) in t.iter().zip(&expect) {
            assert_eq!((a.0, a.1), (b.0, b.1));
            assert!((a.2 - b.2).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_rates_on_ring() {
        let m = ring3();
        let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Finite(0.3) }).unwrap();
        let s = Layout::Joint.join(3, 0b011, 0b100).unwrap();
        let mut seen = Vec::new();
        g.transitions(s, |t, r| seen.push((Layout::Joint.split(3, t), r)));
        let death0 = 1.0 + m.a_minus_at(0, 1) + 0.5 * m.b_minus_at(0, 2);
        let birth2 = (m.a_plus_at(0, 2) + m.a_plus_at(1, 2)) * m.site_volume;
        let env = 1.0 / 0.3;
        let find = |p: u32, mi: u32| seen.iter().find(|(k, _)| *k == (p, mi)).map(|x| x.1).unwrap();
        assert!((find(0b010, 0b100) - death0).abs() < 1e-15);
        assert!((find(0b111, 0b100) - birth2).abs() < 1e-15);
        assert!((find(0b011, 0b000) - env).abs() < 1e-15);
        assert!((find(0b011, 0b101) - env).abs() < 1e-12);
        assert_eq!(seen.len(), 2 + 1 + 1 + 2);
    }

    #[test]
    fn infinite_epsilon_freezes_environment() {
        let m = ring3();
        let g = Generator::new(&m, Variant::Joint { epsilon: TimeScale::Infinite }).unwrap();
        for s in 0..g.n_states() {
            g.transitions(s, |t, _| assert_eq!(Layout::Joint.split(3, t).1, Layout::Joint.split(3, s).1));
        }
    }

    #[test]
    fn matrix_market_export() {
        let g = Generator::new(&one_site(1.0), Variant::Averaged { rho: 0.0 }).unwrap();
        let mut buf = Vec::new();
        g.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket"));
        assert_eq!(text.lines().nth(1), Some("2 2 3"));
    }
}
