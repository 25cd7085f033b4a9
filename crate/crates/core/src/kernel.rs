//! Radial interaction kernels: `a⁺`, `a⁻`, `b⁻`, the pair potential `ψ` and
//! the Lyapunov weight `e` all live here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, unit_ball_volume, unit_sphere_area, Tolerance};
use crate::real::ExtendedReal;

/// Shape descriptor of a radial kernel `k(x) = f(|x|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelShape {
    /// `c (2πσ²)^{-d/2} exp(-|x|²/2σ²)`; integrates to `c`.
    Gaussian { amplitude: f64, width: f64 },
    /// `A exp(-r|x|)`.
    Exponential { amplitude: f64, rate: f64 },
    /// `h 1{|x| <= R}`; `h` may be `"infinity"` for a hard core.
    Tophat { height: ExtendedReal, radius: f64 },
    /// Linear interpolation of `values[i]` at `|x| = i * spacing`, zero beyond the grid.
    Tabulated { values: Vec<f64>, spacing: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub shape: KernelShape,
    pub dim: usize,
}

/// Asymptotic decay class, used to compare tails of two kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Tail {
    Compact(f64),
    Exponential(f64),
    Gaussian(f64),
}

impl Kernel {
    pub fn new(shape: KernelShape, dim: usize) -> Result<Self> {
        let k = Self { shape, dim };
        k.validate()?;
        Ok(k)
    }

    pub fn zero(dim: usize) -> Self {
        Self { shape: KernelShape::Zero, dim }
    }

    pub fn gaussian(amplitude: f64, width: f64, dim: usize) -> Result<Self> {
        Self::new(KernelShape::Gaussian { amplitude, width }, dim)
    }

    pub fn exponential(amplitude: f64, rate: f64, dim: usize) -> Result<Self> {
        Self::new(KernelShape::Exponential { amplitude, rate }, dim)
    }

    pub fn tophat(height: f64, radius: f64, dim: usize) -> Result<Self> {
        Self::new(KernelShape::Tophat { height: ExtendedReal(height), radius }, dim)
    }

    pub fn tabulated(values: Vec<f64>, spacing: f64, dim: usize) -> Result<Self> {
        Self::new(KernelShape::Tabulated { values, spacing }, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > crate::geometry::MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "kernel dimension {} outside 1..={}",
                self.dim,
                crate::geometry::MAX_DIM
            )));
        }
        let bad = |what: &str| Err(Error::InvalidParameter(format!("kernel {what}")));
        match &self.shape {
            KernelShape::Gaussian { amplitude, width } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad("gaussian amplitude must be finite and >= 0");
                }
                if !(width.is_finite() && *width > 0.0) {
                    return bad("gaussian width must be > 0");
                }
            }
            KernelShape::Exponential { amplitude, rate } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return bad("exponential amplitude must be finite and >= 0");
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad("exponential rate must be > 0");
                }
            }
            KernelShape::Tophat { height, radius } => {
                if height.0.is_nan() || height.0 < 0.0 {
                    return Err(Error::NegativePotential(height.0));
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return bad("tophat radius must be >= 0");
                }
            }
            KernelShape::Tabulated { values, spacing } => {
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return bad("tabulated spacing must be > 0");
                }
                if let Some(v) = values.iter().find(|v| **v < 0.0) {
                    return Err(Error::NegativePotential(*v));
                }
                if values.iter().any(|v| v.is_nan()) {
                    return bad("tabulated values must not be NaN");
                }
            }
            KernelShape::Zero => {}
        }
        Ok(())
    }

    /// Kernel value at distance `r >= 0`.
    pub fn eval_r(&self, r: f64) -> f64 {
        match &self.shape {
            KernelShape::Gaussian { amplitude, width } => {
                let norm = (2.0 * std::f64::consts::PI * width * width).powf(self.dim as f64 / 2.0);
                amplitude / norm * (-r * r / (2.0 * width * width)).exp()
            }
            KernelShape::Exponential { amplitude, rate } => amplitude * (-rate * r).exp(),
            KernelShape::Tophat { height, radius } => {
                if r <= *radius {
                    height.0
                } else {
                    0.0
                }
            }
            KernelShape::Tabulated { values, spacing } => {
                if values.is_empty() {
                    return 0.0;
                }
                let pos = r / spacing;
                let i = pos.floor() as usize;
                if i + 1 >= values.len() {
                    if i + 1 == values.len() && pos == i as f64 {
                        values[i]
                    } else {
                        0.0
                    }
                } else {
                    let frac = pos - i as f64;
                    values[i] * (1.0 - frac) + values[i + 1] * frac
                }
            }
            KernelShape::Zero => 0.0,
        }
    }

    /// Kernel value at displacement `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_r(x.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            KernelShape::Zero => true,
            KernelShape::Gaussian { amplitude, .. } | KernelShape::Exponential { amplitude, .. } => {
                *amplitude == 0.0
            }
            KernelShape::Tophat { height, radius } => height.0 == 0.0 || *radius == 0.0,
            KernelShape::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Radius beyond which the kernel vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.shape {
            KernelShape::Zero => Some(0.0),
            KernelShape::Tophat { radius, .. } => Some(*radius),
            KernelShape::Tabulated { values, spacing } => {
                Some(values.len().saturating_sub(1) as f64 * spacing)
            }
            _ => None,
        }
    }

    pub(crate) fn tail(&self) -> Tail {
        match &self.shape {
            KernelShape::Gaussian { width, .. } => Tail::Gaussian(*width),
            KernelShape::Exponential { rate, .. } => Tail::Exponential(*rate),
            _ => Tail::Compact(self.support_radius().unwrap_or(0.0)),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            KernelShape::Tabulated { values, .. } => values.iter().cloned().fold(0.0, f64::max),
            KernelShape::Tophat { height, radius } if *radius == 0.0 => {
                // a point support still has value h at the origin
                height.0
            }
            _ => self.eval_r(0.0),
        }
    }

    /// `∫_{R^d} g(|x|) dx` for a radial integrand, split at the kernel's
    /// support radius and at the tabulation nodes.
    pub fn radial_integral<G: Fn(f64) -> f64>(&self, g: G, tol: Tolerance) -> Result<f64> {
        let d = self.dim;
        let area = unit_sphere_area(d);
        let integrand = |r: f64| g(r) * r.powi(d as i32 - 1);
        let value = match &self.shape {
            KernelShape::Tabulated { values, spacing } => {
                let mut acc = 0.0;
                for i in 0..values.len().saturating_sub(1) {
                    let lo = i as f64 * spacing;
                    acc += quadrature::integrate(&integrand, lo, lo + spacing, tol)?.value;
                }
                acc
            }
            _ => match self.support_radius() {
                Some(r) => quadrature::integrate(&integrand, 0.0, r, tol)?.value,
                None => {
                    // move the split point out to the bulk of the mass
                    let scale = self.length_scale();
                    quadrature::integrate(&integrand, 0.0, 8.0 * scale, tol)?.value
                        + quadrature::integrate_to_infinity(&integrand, 8.0 * scale, tol)?.value
                }
            },
        };
        Ok(area * value)
    }

    pub(crate) fn length_scale(&self) -> f64 {
        match &self.shape {
            KernelShape::Gaussian { width, .. } => *width,
            KernelShape::Exponential { rate, .. } => 1.0 / rate,
            _ => self.support_radius().unwrap_or(1.0).max(1e-12),
        }
    }

    /// `∫ |k|`; closed forms for analytic shapes, quadrature for tabulated.
    pub fn l1_norm(&self) -> Result<f64> {
        let d = self.dim;
        match &self.shape {
            KernelShape::Zero => Ok(0.0),
            KernelShape::Gaussian { amplitude, .. } => Ok(*amplitude),
            KernelShape::Exponential { amplitude, rate } => {
                // A S_{d-1} (d-1)! / r^d
                let fact: f64 = (1..d).map(|i| i as f64).product();
                Ok(amplitude * unit_sphere_area(d) * fact / rate.powi(d as i32))
            }
            KernelShape::Tophat { height, radius } => {
                if *radius == 0.0 || height.0 == 0.0 {
                    return Ok(0.0);
                }
                if height.0.is_infinite() {
                    return Err(Error::DivergentNorm("hard-core tophat has infinite mass".into()));
                }
                Ok(height.0 * unit_ball_volume(d) * radius.powi(d as i32))
            }
            KernelShape::Tabulated { values, .. } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DivergentNorm("tabulated kernel has non-finite values".into()));
                }
                self.radial_integral(|r| self.eval_r(r), Tolerance::default())
            }
        }
    }

    /// `∫ (1 - e^{-k})`, finite for hard cores.
    pub fn mayer_integral(&self) -> Result<f64> {
        let d = self.dim;
        match &self.shape {
            KernelShape::Zero => Ok(0.0),
            KernelShape::Tophat { height, radius } => {
                Ok((1.0 - (-height.0).exp()) * unit_ball_volume(d) * radius.powi(d as i32))
            }
            _ => {
                let v = self.radial_integral(|r| -(-self.eval_r(r)).exp_m1(), Tolerance {
                    rel: 1e-11,
                    ..Tolerance::default()
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::DivergentNorm("1 - exp(-psi) is not integrable".into()))
                }
            }
        }
    }

    /// Copy rescaled so that `‖k‖₁ = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.l1_norm()?;
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize a zero kernel".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            KernelShape::Gaussian { amplitude, width } => {
                KernelShape::Gaussian { amplitude: amplitude * factor, width: *width }
            }
            KernelShape::Exponential { amplitude, rate } => {
                KernelShape::Exponential { amplitude: amplitude * factor, rate: *rate }
            }
            KernelShape::Tophat { height, radius } => {
                KernelShape::Tophat { height: ExtendedReal(height.0 * factor), radius: *radius }
            }
            KernelShape::Tabulated { values, spacing } => KernelShape::Tabulated {
                values: values.iter().map(|v| v * factor).collect(),
                spacing: *spacing,
            },
            KernelShape::Zero => KernelShape::Zero,
        };
        Self { shape, dim: self.dim }
    }

    /// Radius `R` with `∫_{|x|>R} k <= tol ‖k‖₁`. Infinite when `tol == 0`
    /// and the support is unbounded.
    pub fn effective_radius(&self, tol: f64) -> f64 {
        if let Some(r) = self.support_radius() {
            return r;
        }
        if tol <= 0.0 {
            return f64::INFINITY;
        }
        let total = match self.l1_norm() {
            Ok(t) if t > 0.0 => t,
            _ => return 0.0,
        };
        let outside = |radius: f64| -> f64 {
            let area = unit_sphere_area(self.dim);
            quadrature::integrate_to_infinity(
                |r| self.eval_r(r) * r.powi(self.dim as i32 - 1),
                radius,
                Tolerance { rel: 1e-6, abs: 0.0, max_intervals: 2000 },
            )
            .map(|e| area * e.value)
            .unwrap_or(f64::INFINITY)
        };
        let mut hi = self.length_scale();
        while outside(hi) > tol * total {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) > tol * total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_kernel_norm() {
        assert_eq!(Kernel::zero(2).l1_norm().unwrap(), 0.0);
    }

    #[test]
    fn gaussian_normalization_matches_amplitude() {
        for d in 1..=3 {
            let k = Kernel::gaussian(1.0, 1.0, d).unwrap();
            assert_eq!(k.l1_norm().unwrap(), 1.0);
            let q = k.radial_integral(|r| k.eval_r(r), Tolerance::default()).unwrap();
            assert_relative_eq!(q, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn tophat_interval_norm() {
        let k = Kernel::tophat(2.0, 0.5, 1).unwrap();
        assert_relative_eq!(k.l1_norm().unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn exponential_closed_form_agrees_with_quadrature() {
        for d in 1..=3 {
            let k = Kernel::exponential(1.5, 0.7, d).unwrap();
            let q = k.radial_integral(|r| k.eval_r(r), Tolerance::default()).unwrap();
            assert_relative_eq!(k.l1_norm().unwrap(), q, max_relative = 1e-10);
        }
    }

    #[test]
    fn tabulated_linear_interpolation() {
        let k = Kernel::tabulated(vec![2.0, 1.0, 0.0], 1.0, 1).unwrap();
        assert_eq!(k.eval_r(0.5), 1.5);
        assert_eq!(k.eval_r(2.5), 0.0);
        // triangle on [-2, 2] with height 2 at 0: area = 2 * (1.5 + 0.5)
        assert_relative_eq!(k.l1_norm().unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn nonfinite_tabulated_norm_diverges() {
        let k = Kernel::tabulated(vec![f64::INFINITY, 1.0], 1.0, 1).unwrap();
        assert!(matches!(k.l1_norm(), Err(Error::DivergentNorm(_))));
    }

    #[test]
    fn negative_values_rejected() {
        assert!(Kernel::tabulated(vec![1.0, -0.1], 1.0, 1).is_err());
        assert!(Kernel::tophat(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn hard_core_mayer_integral() {
        let k = Kernel::tophat(f64::INFINITY, 0.5, 1).unwrap();
        assert_relative_eq!(k.mayer_integral().unwrap(), 1.0);
        assert_eq!((-k.eval_r(0.2)).exp(), 0.0);
    }

    #[test]
    fn effective_radius_captures_mass() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        let r = k.effective_radius(1e-12);
        // two-sided normal tail 1e-12 sits near 7.1 sigma
        assert!(r > 6.5 && r < 7.6, "r = {r}");
        assert_eq!(Kernel::tophat(1.0, 0.3, 2).unwrap().effective_radius(1e-12), 0.3);
    }
}
