use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::combinatorics::FiniteConfig;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point, MAX_DIM};
use crate::oracle::{Generator, LatticeModel, Layout, Variant};
use crate::params::ModelParams;
use crate::sim::DisplacementSampler;

/// Configuration held by a running replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Snapshot {
    Continuum(FiniteConfig<Point>),
    Lattice { plus: u32, minus: u32 },
}

impl Snapshot {
    pub fn counts(&self) -> (usize, usize) {
        match self {
            Snapshot::Continuum(c) => (c.plus.len(), c.minus.len()),
            Snapshot::Lattice { plus, minus } => (plus.count_ones() as usize, minus.count_ones() as usize),
        }
    }
}

/// Replica state: configuration, clock and event counter.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub events: u64,
    pub(crate) inner: Inner,
}

#[derive(Debug, Clone)]
pub(crate) enum Inner {
    Continuum {
        plus: Vec<Point>,
        minus: Vec<Point>,
        /// Death rate of each `+` point, kept in step with the configuration.
        death: Vec<f64>,
    },
    Lattice(usize),
}

/// What a single step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Jump,
    /// A thinned environment birth candidate was rejected; only time moved.
    Rejected,
    /// Total rate zero: the clock stops at infinity.
    Absorbed,
}

/// Exact event-driven simulator (one global exponential clock) of the joint,
/// environment-only or averaged dynamics.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    variant: Variant,
    engine: Engine,
}

#[derive(Debug, Clone)]
enum Engine {
    Continuum { sampler: DisplacementSampler, a_plus_l1: f64 },
    Lattice(Box<Generator>),
}

impl Simulator {
    pub fn new(params: &ModelParams, variant: Variant) -> Result<Self> {
        params.validate()?;
        let engine = if params.geometry.is_lattice() {
            let model = LatticeModel::new(params.clone())?;
            Engine::Lattice(Box::new(Generator::new(&model, variant)?))
        } else {
            Engine::Continuum { sampler: DisplacementSampler::new(&params.a_plus)?, a_plus_l1: params.a_plus_l1() }
        };
        Ok(Self { params: params.clone(), variant, engine })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn geometry(&self) -> &Geometry {
        &self.params.geometry
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.engine, Engine::Lattice(_))
    }

    fn env_rate(&self) -> f64 {
        match self.variant {
            Variant::Joint { epsilon } | Variant::EnvironmentOnly { epsilon } => epsilon.rate(),
            Variant::Averaged { .. } => 0.0,
        }
    }

    fn plus_moves(&self) -> bool {
        !matches!(self.variant, Variant::EnvironmentOnly { .. })
    }

    /// State at time zero holding the given continuum configuration.
    pub fn continuum_state(&self, plus: Vec<Point>, minus: Vec<Point>) -> Result<SimState> {
        if self.is_lattice() {
            return Err(Error::Unsupported("continuum state on a lattice simulator".into()));
        }
        let g = self.geometry();
        let plus: Vec<Point> = plus.iter().map(|p| g.wrap(p)).collect();
        let minus: Vec<Point> = if matches!(self.variant, Variant::Averaged { .. }) {
            Vec::new()
        } else {
            minus.iter().map(|p| g.wrap(p)).collect()
        };
        for v in [&plus, &minus] {
            let mut s = v.clone();
            s.sort();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::CoincidentPoints);
            }
        }
        let death = (0..plus.len()).map(|i| self.death_rate(&plus[i], i, &plus, &minus)).collect();
        Ok(SimState { t: 0.0, events: 0, inner: Inner::Continuum { plus, minus, death } })
    }

    /// State at time zero with the given site masks.
    pub fn lattice_state(&self, plus: u32, minus: u32) -> Result<SimState> {
        let Engine::Lattice(gen) = &self.engine else {
            return Err(Error::Unsupported("lattice state on a continuum simulator".into()));
        };
        let n = gen.model().n_sites;
        let full = (1u64 << n) - 1;
        if plus as u64 & !full != 0 || minus as u64 & !full != 0 {
            return Err(Error::InvalidParameter("site mask outside the lattice".into()));
        }
        let (p, m) = match gen.layout() {
            Layout::Joint => (plus, minus),
            Layout::Plus => (plus, 0),
            Layout::Minus => (0, minus),
        };
        let s = gen.layout().join(n, p, m).expect("masks fit the layout");
        Ok(SimState { t: 0.0, events: 0, inner: Inner::Lattice(s) })
    }

    fn death_rate(&self, x: &Point, skip: usize, plus: &[Point], minus: &[Point]) -> f64 {
        let p = &self.params;
        let g = self.geometry();
        let mut r = p.m;
        for (j, y) in plus.iter().enumerate() {
            if j != skip {
                r += p.a_minus.eval_r(g.distance(x, y));
            }
        }
        r += match self.variant {
            Variant::Averaged { rho } => p.g * rho,
            _ => p.g * minus.iter().map(|y| p.b_minus.eval_r(g.distance(x, y))).sum::<f64>(),
        };
        r
    }

    /// Recomputes the cached death rates from scratch.
    pub fn refresh(&self, state: &mut SimState) {
        if let Inner::Continuum { plus, minus, death } = &mut state.inner {
            for (i, d) in death.iter_mut().enumerate() {
                *d = self.death_rate(&plus[i], i, plus, minus);
            }
        }
    }

    /// Total event rate of the state (including thinned candidates).
    pub fn total_rate(&self, state: &SimState) -> f64 {
        match (&self.engine, &state.inner) {
            (Engine::Continuum { a_plus_l1, .. }, Inner::Continuum { plus, minus, death }) => {
                let env = self.env_rate();
                let mut r = 0.0;
                if self.plus_moves() {
                    r += death.iter().sum::<f64>() + plus.len() as f64 * a_plus_l1;
                }
                r + env * (minus.len() as f64 + self.params.z * self.geometry().volume())
            }
            (Engine::Lattice(gen), Inner::Lattice(s)) => gen.exit_rate(*s),
            _ => unreachable!("state built by another engine"),
        }
    }

    /// Advances the state by one event of the exponential clock.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut SimState, rng: &mut R) -> StepOutcome {
        let total = self.total_rate(state);
        if !(total > 0.0) {
            state.t = f64::INFINITY;
            return StepOutcome::Absorbed;
        }
        let wait: f64 = Exp1.sample(rng);
        state.t += wait / total;
        state.events += 1;
        let u = rng.random::<f64>() * total;
        self.apply_event(state, u, rng)
    }

    /// Applies the event selected by `u ∈ [0, total)`.
    pub(crate) fn apply_event<R: Rng + ?Sized>(&self, state: &mut SimState, mut u: f64, rng: &mut R) -> StepOutcome {
        match (&self.engine, &mut state.inner) {
            (Engine::Lattice(gen), Inner::Lattice(s)) => {
                let mut target = None;
                let mut last = *s;
                gen.transitions(*s, |t, r| {
                    if target.is_none() {
                        if u < r {
                            target = Some(t);
                        } else {
                            u -= r;
                        }
                    }
                    last = t;
                });
                *s = target.unwrap_or(last);
                StepOutcome::Jump
            }
            (Engine::Continuum { sampler, a_plus_l1 }, Inner::Continuum { plus, minus, death }) => {
                let p = &self.params;
                let g = &p.geometry;
                if self.plus_moves() {
                    for i in 0..death.len() {
                        if u < death[i] {
                            let x = plus.swap_remove(i);
                            death.swap_remove(i);
                            for (j, y) in plus.iter().enumerate() {
                                death[j] -= p.a_minus.eval_r(g.distance(&x, y));
                            }
                            return StepOutcome::Jump;
                        }
                        u -= death[i];
                    }
                    let births = plus.len() as f64 * a_plus_l1;
                    if u < births {
                        let parent = plus[rng.random_range(0..plus.len())];
                        let disp = sampler.sample(rng);
                        let mut x = parent;
                        for k in 0..MAX_DIM {
                            x.0[k] += disp[k];
                        }
                        let x = g.wrap(&x);
                        for (j, y) in plus.iter().enumerate() {
                            death[j] += p.a_minus.eval_r(g.distance(&x, y));
                        }
                        let dx = self.death_rate(&x, usize::MAX, plus, minus);
                        plus.push(x);
                        death.push(dx);
                        return StepOutcome::Jump;
                    }
                    u -= births;
                }
                let env = self.env_rate();
                let coupled = matches!(self.variant, Variant::Joint { .. }) && p.g != 0.0;
                let deaths = env * minus.len() as f64;
                if u < deaths {
                    let y = minus.swap_remove(rng.random_range(0..minus.len()));
                    if coupled {
                        for (j, x) in plus.iter().enumerate() {
                            death[j] -= p.g * p.b_minus.eval_r(g.distance(x, &y));
                        }
                    }
                    return StepOutcome::Jump;
                }
                let y = uniform_point(g, rng);
                let energy: f64 = minus.iter().map(|w| p.psi.eval_r(g.distance(&y, w))).sum();
                if rng.random::<f64>() >= (-energy).exp() {
                    return StepOutcome::Rejected;
                }
                if coupled {
                    for (j, x) in plus.iter().enumerate() {
                        death[j] += p.g * p.b_minus.eval_r(g.distance(x, &y));
                    }
                }
                minus.push(y);
                StepOutcome::Jump
            }
            _ => unreachable!("state built by another engine"),
        }
    }

    pub fn snapshot(&self, state: &SimState) -> Snapshot {
        match (&self.engine, &state.inner) {
            (_, Inner::Continuum { plus, minus, .. }) => {
                let (mut a, mut b) = (plus.clone(), minus.clone());
                a.sort();
                b.sort();
                Snapshot::Continuum(FiniteConfig { plus: a, minus: b })
            }
            (Engine::Lattice(gen), Inner::Lattice(s)) => {
                let (plus, minus) = gen.layout().split(gen.model().n_sites, *s);
                Snapshot::Lattice { plus, minus }
            }
            _ => unreachable!("state built by another engine"),
        }
    }

    /// Positions of the configuration (site points on a lattice).
    pub fn points(&self, state: &SimState) -> (Vec<Point>, Vec<Point>) {
        match self.snapshot(state) {
            Snapshot::Continuum(c) => (c.plus, c.minus),
            Snapshot::Lattice { plus, minus } => {
                let g = self.geometry();
                let pts = |m: u32| crate::oracle::bits(m).map(|i| g.site_point(i)).collect();
                (pts(plus), pts(minus))
            }
        }
    }
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(g: &Geometry, rng: &mut R) -> Point {
    let mut x = [0.0; MAX_DIM];
    if let Geometry::Torus { side, dim } = g {
        for c in x.iter_mut().take(*dim) {
            *c = rng.random::<f64>() * side;
        }
    }
    Point(x)
}
