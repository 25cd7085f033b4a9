use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::kernel::{Kernel, KernelShape};
use crate::real::TimeScale;

/// JSON form of the model: kernel shapes without dimensions, which are taken
/// from the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub m: f64,
    pub g: f64,
    pub z: f64,
    pub epsilon: TimeScale,
    #[serde(default = "one")]
    pub vartheta: f64,
    #[serde(default)]
    pub lambda: f64,
    pub a_plus: KernelShape,
    pub a_minus: KernelShape,
    #[serde(default = "zero_shape")]
    pub b_minus: KernelShape,
    #[serde(default = "zero_shape")]
    pub psi: KernelShape,
    pub geometry: Geometry,
}

fn one() -> f64 {
    1.0
}

fn zero_shape() -> KernelShape {
    KernelShape::Zero
}

/// Validated model parameters: rates, kernels and the finite-volume domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Intrinsic mortality of `+` particles.
    pub m: f64,
    /// Coupling to the environment.
    pub g: f64,
    /// Environment activity.
    pub z: f64,
    pub epsilon: TimeScale,
    pub vartheta: f64,
    pub lambda: f64,
    /// Branching (dispersal of offspring).
    pub a_plus: Kernel,
    /// Competition among `+` particles.
    pub a_minus: Kernel,
    /// Competition exerted by the environment on `+` particles.
    pub b_minus: Kernel,
    /// Environment pair potential.
    pub psi: Kernel,
    pub geometry: Geometry,
}

impl ModelSpec {
    pub fn into_params(self) -> Result<ModelParams> {
        self.geometry.validate()?;
        let d = self.geometry.dim();
        let p = ModelParams {
            m: self.m,
            g: self.g,
            z: self.z,
            epsilon: self.epsilon,
            vartheta: self.vartheta,
            lambda: self.lambda,
            a_plus: Kernel::new(self.a_plus, d)?,
            a_minus: Kernel::new(self.a_minus, d)?,
            b_minus: Kernel::new(self.b_minus, d)?,
            psi: Kernel::new(self.psi, d)?,
            geometry: self.geometry,
        };
        p.validate()?;
        Ok(p)
    }
}

impl ModelParams {
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            m: self.m,
            g: self.g,
            z: self.z,
            epsilon: self.epsilon,
            vartheta: self.vartheta,
            lambda: self.lambda,
            a_plus: self.a_plus.shape.clone(),
            a_minus: self.a_minus.shape.clone(),
            b_minus: self.b_minus.shape.clone(),
            psi: self.psi.shape.clone(),
            geometry: self.geometry.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.m) {
            return bad("m must be >= 0");
        }
        if !nonneg(self.g) {
            return bad("g must be >= 0");
        }
        if !nonneg(self.z) {
            return bad("z must be >= 0");
        }
        if let TimeScale::Finite(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return bad("epsilon must be > 0 or \"infinity\"");
            }
        }
        if !(self.vartheta.is_finite() && self.vartheta > 0.0) {
            return bad("vartheta must be > 0");
        }
        if !nonneg(self.lambda) {
            return bad("lambda must be >= 0");
        }
        self.geometry.validate()?;
        let d = self.geometry.dim();
        for k in [&self.a_plus, &self.a_minus, &self.b_minus, &self.psi] {
            if k.dim != d {
                return bad("kernel dimension differs from geometry dimension");
            }
            k.validate()?;
        }
        if self.a_plus.is_zero() {
            return bad("a_plus must not vanish identically");
        }
        for (name, k) in [("a_plus", &self.a_plus), ("a_minus", &self.a_minus), ("b_minus", &self.b_minus)] {
            if !k.l1_norm()?.is_finite() || !k.sup_norm().is_finite() {
                return Err(Error::DivergentNorm(format!("{name} must be in L1 and L-infinity")));
            }
        }
        if self.g > 0.0 {
            let nb = self.b_minus.l1_norm()?;
            if (nb - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "b_minus must be normalized to unit mass when g > 0 (got {nb})"
                )));
            }
        }
        Ok(())
    }

    pub fn a_plus_l1(&self) -> f64 {
        self.a_plus.l1_norm().expect("validated")
    }

    pub fn a_minus_l1(&self) -> f64 {
        self.a_minus.l1_norm().expect("validated")
    }

    pub fn b_minus_l1(&self) -> f64 {
        self.b_minus.l1_norm().expect("validated")
    }

    pub fn with_epsilon(&self, epsilon: TimeScale) -> Self {
        Self { epsilon, ..self.clone() }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// One-dimensional torus model with Gaussian kernels.
    pub fn torus_model(side: f64) -> ModelParams {
        ModelParams {
            m: 1.0,
            g: 0.5,
            z: 1.0,
            epsilon: TimeScale::Finite(0.3),
            vartheta: 1.0,
            lambda: 0.0,
            a_plus: Kernel::gaussian(1.0, 0.5, 1).unwrap(),
            a_minus: Kernel::gaussian(1.0, 0.5, 1).unwrap(),
            b_minus: Kernel::gaussian(1.0, 0.5, 1).unwrap(),
            psi: Kernel::zero(1),
            geometry: Geometry::torus(side, 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_roundtrip_through_json() {
        let json = r#"{
            "m": 1.0, "g": 0.5, "z": 1.0, "epsilon": "infinity",
            "a_plus": {"type": "gaussian", "amplitude": 1.0, "width": 1.0},
            "a_minus": {"type": "gaussian", "amplitude": 1.0, "width": 1.0},
            "b_minus": {"type": "tophat", "height": 0.5, "radius": 1.0},
            "psi": {"type": "tophat", "height": "infinity", "radius": 0.1},
            "geometry": {"type": "torus", "side": 10.0, "dim": 1}
        }"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let p = spec.clone().into_params().unwrap();
        assert_eq!(p.epsilon, TimeScale::Infinite);
        assert_eq!(p.psi.eval_r(0.05), f64::INFINITY);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&p.to_spec()).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{"m": 1, "g": 0, "z": 1, "epsilon": 1, "bogus": 3,
            "a_plus": {"type": "zero"}, "a_minus": {"type": "zero"},
            "geometry": {"type": "torus", "side": 1, "dim": 1}}"#;
        assert!(serde_json::from_str::<ModelSpec>(json).is_err());
    }

    #[test]
    fn b_minus_must_be_normalized() {
        let mut p = fixtures::torus_model(10.0);
        p.b_minus = Kernel::gaussian(2.0, 1.0, 1).unwrap();
        assert!(p.validate().is_err());
        p.g = 0.0;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn vanishing_branching_rejected() {
        let mut p = fixtures::torus_model(10.0);
        p.a_plus = Kernel::zero(1);
        assert!(p.validate().is_err());
    }
}
