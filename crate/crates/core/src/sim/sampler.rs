use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Gamma, Normal, UnitBall, UnitCircle, UnitDisc, UnitSphere};

use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;
use crate::kernel::{Kernel, KernelShape};

/// Draws displacements with density `a(x)/‖a‖₁` for a radial kernel.
#[derive(Debug, Clone)]
pub struct DisplacementSampler {
    dim: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian(Normal<f64>),
    Ball(f64),
    Radial(Gamma<f64>),
    Tabulated { alias: WeightedAliasIndex<f64>, values: Vec<f64>, spacing: f64, bin_max: Vec<f64> },
}

const GL3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

impl DisplacementSampler {
    pub fn new(kernel: &Kernel) -> Result<Self> {
        let dim = kernel.dim;
        let bad = |m: &str| Error::InvalidParameter(format!("cannot sample displacements: {m}"));
        let kind = match &kernel.shape {
            KernelShape::Gaussian { amplitude, width } if *amplitude > 0.0 => {
                Kind::Gaussian(Normal::new(0.0, *width).map_err(|_| bad("width"))?)
            }
            KernelShape::Tophat { height, radius } if height.0 > 0.0 && height.0.is_finite() && *radius > 0.0 => {
                Kind::Ball(*radius)
            }
            KernelShape::Exponential { amplitude, rate } if *amplitude > 0.0 => {
                Kind::Radial(Gamma::new(dim as f64, 1.0 / rate).map_err(|_| bad("rate"))?)
            }
            KernelShape::Tabulated { values, spacing } => {
                if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                    return Err(bad("tabulated values must be finite and >= 0"));
                }
                let mut weights = Vec::new();
                let mut bin_max = Vec::new();
                for i in 0..values.len().saturating_sub(1) {
                    let lo = i as f64 * spacing;
                    let hi = lo + spacing;
                    let f = |r: f64| kernel.eval_r(r) * r.powi(dim as i32 - 1);
                    let mass: f64 = GL3.iter().map(|(x, w)| w * f(lo + 0.5 * spacing * (1.0 + x))).sum::<f64>() * 0.5 * spacing;
                    weights.push(mass);
                    bin_max.push(values[i].max(values[i + 1]) * hi.powi(dim as i32 - 1));
                }
                let alias = WeightedAliasIndex::new(weights).map_err(|_| bad("tabulated kernel has no mass"))?;
                Kind::Tabulated { alias, values: values.clone(), spacing: *spacing, bin_max }
            }
            _ => return Err(bad("kernel must be a positive gaussian, exponential, finite tophat or tabulated shape")),
        };
        Ok(Self { dim, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; MAX_DIM] {
        let d = self.dim;
        let mut out = [0.0; MAX_DIM];
        match &self.kind {
            Kind::Gaussian(n) => {
                for c in out.iter_mut().take(d) {
                    *c = n.sample(rng);
                }
            }
            Kind::Ball(r) => {
                let u: Vec<f64> = match d {
                    1 => vec![rng.random_range(-1.0..=1.0)],
                    2 => UnitDisc.sample(rng).to_vec(),
                    _ => UnitBall.sample(rng).to_vec(),
                };
                for (c, x) in out.iter_mut().zip(u) {
                    *c = r * x;
                }
            }
            Kind::Radial(gamma) => {
                let r = gamma.sample(rng);
                self.scatter(&mut out, r, rng);
            }
            Kind::Tabulated { alias, values, spacing, bin_max } => {
                let r = loop {
                    let i = alias.sample(rng);
                    let lo = i as f64 * spacing;
                    let r = lo + rng.random::<f64>() * spacing;
                    let frac = (r - lo) / spacing;
                    let f = (values[i] * (1.0 - frac) + values[i + 1] * frac) * r.powi(d as i32 - 1);
                    if rng.random::<f64>() * bin_max[i] < f {
                        break r;
                    }
                };
                self.scatter(&mut out, r, rng);
            }
        }
        out
    }

    /// `r` times a uniform direction.
    fn scatter<R: Rng + ?Sized>(&self, out: &mut [f64; MAX_DIM], r: f64, rng: &mut R) {
        let dir: Vec<f64> = match self.dim {
            1 => vec![if rng.random::<bool>() { 1.0 } else { -1.0 }],
            2 => UnitCircle.sample(rng).to_vec(),
            _ => UnitSphere.sample(rng).to_vec(),
        };
        for (c, u) in out.iter_mut().zip(dir) {
            *c = r * u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn radii(kernel: &Kernel, n: usize) -> Vec<f64> {
        let s = DisplacementSampler::new(kernel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..n).map(|_| s.sample(&mut rng).iter().map(|c| c * c).sum::<f64>().sqrt()).collect()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn mean_radius_per_shape() {
        let n = 40_000;
        let tol = 0.02;
        // E|X| for a 2-D gaussian is σ√(π/2)
        let g = radii(&Kernel::gaussian(1.0, 0.7, 2).unwrap(), n);
        assert!((mean(&g) - 0.7 * (std::f64::consts::PI / 2.0).sqrt()).abs() < tol);
        // uniform in the 3-ball: E r = 3R/4
        let b = radii(&Kernel::tophat(2.0, 1.2, 3).unwrap(), n);
        assert!((mean(&b) - 0.9).abs() < tol);
        assert!(b.iter().all(|r| *r <= 1.2));
        // r^{d-1} e^{-κr}: Gamma(d, 1/κ), mean d/κ
        let e = radii(&Kernel::exponential(1.0, 2.0, 2).unwrap(), n);
        assert!((mean(&e) - 1.0).abs() < tol);
        // flat tabulated kernel in 1-D is uniform on [-L, L]
        let t = radii(&Kernel::tabulated(vec![1.0, 1.0, 1.0, 1.0, 1.0], 0.5, 1).unwrap(), n);
        assert!((mean(&t) - 1.0).abs() < tol);
        assert!(t.iter().all(|r| *r <= 2.0));
    }

    #[test]
    fn tabulated_triangle_in_two_dimensions() {
        // density ∝ (1 - r) r on [0, 1]: E r = 1/2
        let k = Kernel::tabulated(vec![1.0, 0.5, 0.0], 0.5, 2).unwrap();
        let r = radii(&k, 60_000);
        assert!((mean(&r) - 0.5).abs() < 0.01);
    }

    #[test]
    fn unsupported_shapes_rejected() {
        assert!(DisplacementSampler::new(&Kernel::zero(1)).is_err());
        assert!(DisplacementSampler::new(&Kernel::tophat(f64::INFINITY, 1.0, 1).unwrap()).is_err());
    }
}
