use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};
use crate::kernel::Kernel;

/// A two-sorted finite simple configuration `(η⁺, η⁻)`; each sort is kept
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteConfig<P> {
    pub plus: Vec<P>,
    pub minus: Vec<P>,
}

impl<P: Ord> FiniteConfig<P> {
    pub fn new(mut plus: Vec<P>, mut minus: Vec<P>) -> Result<Self> {
        for v in [&mut plus, &mut minus] {
            v.sort();
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::CoincidentPoints);
            }
        }
        Ok(Self { plus, minus })
    }

    pub fn empty() -> Self {
        Self { plus: Vec::new(), minus: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// Inserts into the `+` sort; `false` if the point is already present.
    pub fn insert_plus(&mut self, p: P) -> bool {
        insert_sorted(&mut self.plus, p)
    }

    pub fn insert_minus(&mut self, p: P) -> bool {
        insert_sorted(&mut self.minus, p)
    }
}

fn insert_sorted<P: Ord>(v: &mut Vec<P>, p: P) -> bool {
    match v.binary_search(&p) {
        Ok(_) => false,
        Err(i) => {
            v.insert(i, p);
            true
        }
    }
}

impl FiniteConfig<usize> {
    /// Site bitmasks `(η⁺, η⁻)`.
    pub fn masks(&self) -> (u32, u32) {
        let m = |v: &[usize]| v.iter().fold(0u32, |acc, &i| acc | (1 << i));
        (m(&self.plus), m(&self.minus))
    }

    pub fn from_masks(plus: u32, minus: u32) -> Self {
        let bits = |m: u32| (0..32).filter(|i| m >> i & 1 == 1).collect();
        Self { plus: bits(plus), minus: bits(minus) }
    }
}

/// `E_ψ(x, γ⁻) = Σ_{y∈γ⁻} ψ(x − y)` with minimum-image distances; `+∞` for
/// a hard-core overlap.
pub fn relative_energy(x: &Point, gamma_minus: &[Point], psi: &Kernel, geometry: &Geometry) -> f64 {
    gamma_minus.iter().map(|y| psi.eval_r(geometry.distance(x, y))).sum()
}

/// `E_{b⁻}(η⁺, η⁻) = Σ_{x∈η⁺} Σ_{y∈η⁻} b⁻(x − y)`.
pub fn cross_energy(eta_plus: &[Point], eta_minus: &[Point], b_minus: &Kernel, geometry: &Geometry) -> f64 {
    eta_plus.iter().map(|x| relative_energy(x, eta_minus, b_minus, geometry)).sum()
}
