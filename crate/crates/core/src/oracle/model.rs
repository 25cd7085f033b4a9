use crate::envelope::EnvelopeRates;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::params::ModelParams;

/// Largest site count accepted for the joint (`4^n`-state) chain.
pub const MAX_ORACLE_SITES: usize = 12;

/// The model discretized on a finite site space: kernels become symmetric
/// site × site matrices evaluated at minimum-image distances.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub params: ModelParams,
    pub n_sites: usize,
    pub site_volume: f64,
    /// Row-major `n × n` matrices.
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    /// Rows rescaled so that `Σ_y B⁻(x, y) v = 1` (when `b⁻` is not zero).
    pub b_minus: Vec<f64>,
    pub psi: Vec<f64>,
}

impl LatticeModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let geometry = &params.geometry;
        let (Some(n), Some(v)) = (geometry.n_sites(), geometry.site_volume()) else {
            return Err(Error::Unsupported("the exact oracle needs a lattice geometry".into()));
        };
        if n > MAX_ORACLE_SITES {
            return Err(Error::StateSpaceTooLarge {
                sites: n,
                states: 4u64.saturating_pow(n as u32),
                limit: 4u64.pow(MAX_ORACLE_SITES as u32),
            });
        }
        let matrix = |k: &Kernel| -> Vec<f64> {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = k.eval_r(geometry.site_distance(i, j));
                }
            }
            out
        };
        let a_plus = matrix(&params.a_plus);
        let a_minus = matrix(&params.a_minus);
        let mut b_minus = matrix(&params.b_minus);
        let psi = matrix(&params.psi);
        for (name, m) in [("a_plus", &a_plus), ("a_minus", &a_minus), ("b_minus", &b_minus)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteRate(format!("{name} matrix has non-finite entries")));
            }
        }
        if psi.iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::NegativePotential(psi.iter().cloned().fold(f64::INFINITY, f64::min)));
        }
        for row in b_minus.chunks_mut(n) {
            let mass: f64 = row.iter().sum::<f64>() * v;
            if mass > 0.0 {
                row.iter_mut().for_each(|b| *b /= mass);
            } else if params.g > 0.0 {
                return Err(Error::InvalidParameter("b_minus vanishes on the lattice".into()));
            }
        }
        Ok(Self { params, n_sites: n, site_volume: v, a_plus, a_minus, b_minus, psi })
    }

    #[inline]
    pub fn a_plus_at(&self, x: usize, y: usize) -> f64 {
        self.a_plus[x * self.n_sites + y]
    }

    #[inline]
    pub fn a_minus_at(&self, x: usize, y: usize) -> f64 {
        self.a_minus[x * self.n_sites + y]
    }

    #[inline]
    pub fn b_minus_at(&self, x: usize, y: usize) -> f64 {
        self.b_minus[x * self.n_sites + y]
    }

    #[inline]
    pub fn psi_at(&self, x: usize, y: usize) -> f64 {
        self.psi[x * self.n_sites + y]
    }

    /// Discrete analogue of `‖a⁺‖₁`: `max_x Σ_y A⁺(x, y) v`.
    pub fn a_plus_mass(&self) -> f64 {
        self.a_plus.chunks(self.n_sites).map(|r| r.iter().sum::<f64>() * self.site_volume).fold(0.0, f64::max)
    }

    /// Envelope rates with the discrete branching mass in place of `‖a⁺‖₁`.
    pub fn envelope_rates(&self) -> EnvelopeRates {
        EnvelopeRates {
            m: self.params.m,
            g: self.params.g,
            lambda: self.params.lambda,
            vartheta: self.params.vartheta,
            a_plus_l1: self.a_plus_mass(),
        }
    }

    /// `Σ_{y∈η⁻} Ψ(x, y)` over a site mask.
    pub fn psi_energy(&self, x: usize, minus: u32) -> f64 {
        bits(minus).map(|y| self.psi_at(x, y)).sum()
    }
}

/// Set bits of a mask, low to high.
pub(crate) fn bits(mut mask: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::geometry::Geometry;
    use crate::params::fixtures::torus_model;

    /// Three-site unit ring with Gaussian-derived kernel matrices
    /// (m = 1, g = 0.5, z = 1, ε = 0.3).
    pub fn ring3() -> LatticeModel {
        LatticeModel::new(ModelParams { geometry: Geometry::ring(3, 1.0), ..torus_model(3.0) }).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    #[test]
    fn matrices_symmetric_and_b_rows_normalized() {
        let m = fixtures::ring3();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(m.a_plus_at(x, y), m.a_plus_at(y, x));
            }
            let row: f64 = (0..3).map(|y| m.b_minus_at(x, y)).sum::<f64>() * m.site_volume;
            assert!((row - 1.0).abs() < 1e-14);
        }
        let peak = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((m.a_plus_at(0, 0) - peak).abs() < 1e-15);
        assert!((m.a_plus_at(0, 2) - peak * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(bits(0b1010).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn continuum_and_large_lattices_rejected() {
        let p = crate::params::fixtures::torus_model(3.0);
        assert!(LatticeModel::new(p.clone()).is_err());
        let big = ModelParams { geometry: Geometry::ring(13, 1.0), ..p };
        assert!(matches!(LatticeModel::new(big), Err(Error::StateSpaceTooLarge { .. })));
    }
}
