//! The Lyapunov functional `V = V₀⁺ + V₀⁻ + V₁⁺ + V₁⁻ + W` built from a
//! weight `e` and the pair weight `Ξ(x,y) = e(x)e(y)(1+|x−y|^κ)/|x−y|^κ`,
//! its drift constants, and the exact drift `L_ε V` on one-dimensional tori.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};
use crate::kernel::Kernel;
use crate::params::ModelParams;
use crate::quadrature::{self, unit_sphere_area, Tolerance};

const TOL: Tolerance = Tolerance { rel: 1e-9, abs: 1e-13, max_intervals: 6000 };
/// Periodic images summed when folding a kernel onto a torus.
const IMAGES: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    pub e: Kernel,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub e_l1: f64,
    pub a_plus_over_e_l1: f64,
    pub a_plus_over_e_sup: f64,
    pub c_kappa: f64,
    pub c_prime: f64,
    /// `‖a⁺/e‖_∞ ∫_{|y|≤1}|y|^{−κ} + 2‖a⁺/e‖₁`.
    pub c_prime_fallback: f64,
    pub c_minus: f64,
    pub c_epsilon: f64,
}

impl LyapunovSpec {
    pub fn new(e: Kernel, kappa: f64) -> Result<Self> {
        let s = Self { e, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.e.dim as f64;
        if !(self.kappa > 0.0 && self.kappa < d) {
            return Err(Error::InvalidParameter(format!("kappa = {} must lie in (0, {d})", self.kappa)));
        }
        if self.e.support_radius().is_some() {
            return Err(Error::InvalidParameter("the weight e must be strictly positive".into()));
        }
        if self.e.sup_norm() > 1.0 + 1e-15 {
            return Err(Error::InvalidParameter("the weight e must take values in (0, 1]".into()));
        }
        Ok(())
    }

    fn h(&self, r: f64) -> f64 {
        1.0 + r.powf(-self.kappa)
    }

    /// `Ξ(x, y)` at distance `r` between points with weights `ex`, `ey`.
    fn xi_r(&self, ex: f64, ey: f64, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(ex * ey * self.h(r))
    }
}

pub fn xi(spec: &LyapunovSpec, geometry: &Geometry, x: &Point, y: &Point) -> Result<f64> {
    let ex = spec.e.eval_r(geometry.norm(x));
    let ey = spec.e.eval_r(geometry.norm(y));
    spec.xi_r(ex, ey, geometry.distance(x, y))
}

/// Weight condition: `e(x+y) ≤ e(x)/e(y)` on a radial test grid, finite
/// `‖a⁺/e‖₁`, `‖a⁺/e‖_∞`, and integrable `ψ`.
pub fn check_weight_condition(spec: &LyapunovSpec, params: &ModelParams) -> Result<()> {
    spec.validate()?;
    let e = &spec.e;
    let scale = e.length_scale();
    let n = 60;
    for i in 0..=n {
        let r1 = 8.0 * scale * i as f64 / n as f64;
        for j in 0..=n {
            let r2 = 8.0 * scale * j as f64 / n as f64;
            // |x + y| ranges over [|r1 − r2|, r1 + r2]
            for k in 0..=8 {
                let s = (r1 - r2).abs() + (r1 + r2 - (r1 - r2).abs()) * k as f64 / 8.0;
                if e.eval_r(s) * e.eval_r(r2) > e.eval_r(r1) * (1.0 + 1e-12) {
                    return Err(Error::Constraint(format!(
                        "weight condition fails: e({s}) e({r2}) > e({r1})"
                    )));
                }
            }
        }
    }
    let (l1, sup) = a_plus_over_e_norms(spec, &params.a_plus)?;
    if !l1.is_finite() || !sup.is_finite() {
        return Err(Error::DivergentNorm("a+/e must be in L1 and L-infinity".into()));
    }
    if params.psi.l1_norm().map(|v| !v.is_finite()).unwrap_or(true) {
        return Err(Error::DivergentNorm("the weight condition needs an integrable psi".into()));
    }
    Ok(())
}

/// Whether `a/e` decays at infinity, comparing decay classes.
fn ratio_decays(a: &Kernel, e: &Kernel) -> bool {
    use crate::kernel::Tail;
    match (a.tail(), e.tail()) {
        (Tail::Compact(_), _) => true,
        (_, Tail::Compact(_)) => false,
        (Tail::Gaussian(_), Tail::Exponential(_)) => true,
        (Tail::Gaussian(sa), Tail::Gaussian(se)) => sa < se,
        (Tail::Exponential(ka), Tail::Exponential(ke)) => ka > ke,
        (Tail::Exponential(_), Tail::Gaussian(_)) => false,
    }
}

fn a_plus_over_e_norms(spec: &LyapunovSpec, a_plus: &Kernel) -> Result<(f64, f64)> {
    if !ratio_decays(a_plus, &spec.e) {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let f = |r: f64| {
        let a = a_plus.eval_r(r);
        if a == 0.0 { 0.0 } else { a / spec.e.eval_r(r) }
    };
    let l1 = a_plus.radial_integral(f, TOL)?;
    let reach = a_plus.support_radius().unwrap_or(20.0 * a_plus.length_scale().max(spec.e.length_scale()));
    let sup = (0..=20_000).map(|i| f(reach * i as f64 / 20_000.0)).fold(0.0, f64::max);
    Ok((l1, sup))
}

/// `∫_{|y|≤1} |y|^{−κ} dy`.
fn singular_ball(d: usize, kappa: f64) -> f64 {
    unit_sphere_area(d) / (d as f64 - kappa)
}

/// `∫ k(|y|) |y|^{−κ} dy` by radial quadrature with the origin singularity
/// removed analytically.
fn radial_singular(k: &Kernel, kappa: f64) -> Result<f64> {
    let d = k.dim;
    let s = d as f64 - 1.0 - kappa;
    let g = |r: f64| if r == 0.0 { 0.0 } else { k.eval_r(r) * r.powf(s) };
    let split = k.support_radius().unwrap_or(8.0 * k.length_scale());
    let near = quadrature::integrate_left_singular(g, 0.0, split, s.min(0.0), TOL)?.value;
    let far = if k.support_radius().is_some() { 0.0 } else { quadrature::integrate_to_infinity(g, split, TOL)?.value };
    Ok(unit_sphere_area(d) * (near + far))
}

/// One-dimensional integral over `R` or over a circle of length `period`,
/// with power singularities of exponent `−κ` allowed at `breaks`.
fn line_integral<F: Fn(f64) -> f64>(f: F, breaks: &[f64], kappa: f64, period: Option<f64>) -> Result<f64> {
    match period {
        None => Ok(quadrature::integrate_real_line(f, breaks, -kappa, TOL)?.value),
        Some(l) => {
            let half = 0.5 * l;
            let mut pts: Vec<f64> = breaks.iter().map(|b| b - l * (b / l).round()).collect();
            pts.push(-half);
            pts.push(half);
            pts.sort_by(f64::total_cmp);
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let mut acc = 0.0;
            for w in pts.windows(2) {
                acc += quadrature::integrate_both_singular(&f, w[0], w[1], -kappa, TOL)?.value;
            }
            Ok(acc)
        }
    }
}

fn min_image(x: f64, period: Option<f64>) -> f64 {
    match period {
        Some(l) => x - l * (x / l).round(),
        None => x,
    }
}

/// The branching kernel as seen by a wrapped displacement on a circle.
fn folded(a: &Kernel, y: f64, period: Option<f64>) -> f64 {
    match period {
        None => a.eval_r(y.abs()),
        Some(l) => {
            let y = min_image(y, Some(l));
            (-IMAGES..=IMAGES).map(|n| a.eval_r((y + n as f64 * l).abs())).sum()
        }
    }
}

fn kernel_breaks(k: &Kernel) -> Vec<f64> {
    match k.support_radius() {
        Some(r) if r > 0.0 => vec![-r, r],
        _ => vec![],
    }
}

/// `sup_w ∫ f(y) h(|y − w|) dy` over a grid of shifts `w`, refined around the
/// best grid point.
fn sup_shift<F: Fn(f64) -> f64 + Copy>(
    spec: &LyapunovSpec,
    f: F,
    base_breaks: &[f64],
    reach: f64,
    period: Option<f64>,
) -> Result<f64> {
    let eval = |w: f64| -> Result<f64> {
        let mut breaks = base_breaks.to_vec();
        breaks.push(w);
        line_integral(|y| f(y) * spec.h(min_image(y - w, period).abs()), &breaks, spec.kappa, period)
    };
    let n = 40;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=n {
        let w = reach * i as f64 / n as f64;
        let v = eval(w)?;
        if v > best.1 {
            best = (w, v);
        }
    }
    // golden-section refinement around the best grid point
    let step = reach / n as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(reach));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..30 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        let (fa, fb) = (eval(a)?, eval(b)?);
        best.1 = best.1.max(fa).max(fb);
        if fa > fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    Ok(best.1)
}

/// The drift constants and `c_ε`. In one dimension the suprema are computed
/// by quadrature, both on `R` and on the periodic domain when the geometry is
/// a torus, keeping the larger value. In higher dimensions the analytic
/// fallback bounds are used.
pub fn lyapunov_constants(spec: &LyapunovSpec, params: &ModelParams) -> Result<LyapunovConstants> {
    check_weight_condition(spec, params)?;
    let d = spec.e.dim;
    let kappa = spec.kappa;
    let a = &params.a_plus;
    let e = &spec.e;
    let e_l1 = e.l1_norm()?;
    let (f_l1, f_sup) = a_plus_over_e_norms(spec, a)?;
    let ball = singular_ball(d, kappa);
    let c_prime_fallback = f_sup * ball + 2.0 * f_l1;
    let c_minus_fallback = e.sup_norm() * ball + 2.0 * e_l1;
    let (c_kappa, c_prime, c_minus, f_l1) = if d == 1 {
        let periods: Vec<Option<f64>> = match &params.geometry {
            Geometry::Torus { side, .. } => vec![None, Some(*side)],
            _ => vec![None],
        };
        let mut ck = 0.0f64;
        let mut cp = 0.0f64;
        let mut cm = 0.0f64;
        let mut fl = 0.0f64;
        let mut ab = kernel_breaks(a);
        ab.push(0.0);
        for &p in &periods {
            let fy = |y: f64| {
                let v = folded(a, y, p);
                if v == 0.0 { 0.0 } else { v / e.eval_r(min_image(y, p).abs()) }
            };
            fl = fl.max(line_integral(fy, &ab, kappa, p)?);
            ck = ck.max(line_integral(|y| folded(a, y, p) * spec.h(min_image(y, p).abs()), &ab, kappa, p)?);
            let reach_a = a.support_radius().unwrap_or(10.0 * a.length_scale()).max(e.length_scale());
            let reach_a = p.map_or(reach_a, |l| reach_a.min(0.5 * l));
            cp = cp.max(sup_shift(spec, fy, &ab, reach_a, p)?);
            let ey = |y: f64| e.eval_r(min_image(y, p).abs());
            let reach_e = p.map_or(10.0 * e.length_scale(), |l| (10.0 * e.length_scale()).min(0.5 * l));
            cm = cm.max(sup_shift(spec, ey, &[0.0], reach_e, p)?);
        }
        (ck, cp, cm, fl)
    } else {
        let ck = a.l1_norm()? + radial_singular(a, kappa)?;
        (ck, c_prime_fallback, c_minus_fallback, f_l1)
    };
    let rate = params.epsilon.rate();
    let z = params.z;
    let m = params.m;
    let c_epsilon = [
        f_l1 - m + c_kappa + z * rate * c_minus,
        (z * c_minus - 1.0) * rate,
        2.0 * (c_prime - m),
        c_prime - m - rate,
        c_prime,
        c_prime - m - 1.0,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovConstants {
        e_l1,
        a_plus_over_e_l1: f_l1,
        a_plus_over_e_sup: f_sup,
        c_kappa,
        c_prime,
        c_prime_fallback,
        c_minus,
        c_epsilon,
    })
}

/// `V(γ)`; fails on coincident points.
pub fn lyapunov_value(plus: &[Point], minus: &[Point], spec: &LyapunovSpec, geometry: &Geometry) -> Result<f64> {
    let ep: Vec<f64> = plus.iter().map(|x| spec.e.eval_r(geometry.norm(x))).collect();
    let em: Vec<f64> = minus.iter().map(|x| spec.e.eval_r(geometry.norm(x))).collect();
    let mut v: f64 = ep.iter().sum::<f64>() + em.iter().sum::<f64>();
    for (pts, ws) in [(plus, &ep), (minus, &em)] {
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                v += spec.xi_r(ws[i], ws[j], geometry.distance(&pts[i], &pts[j]))?;
            }
        }
    }
    for (x, ex) in plus.iter().zip(&ep) {
        for (y, ey) in minus.iter().zip(&em) {
            v += spec.xi_r(*ex, *ey, geometry.distance(x, y))?;
        }
    }
    Ok(v)
}

/// `(⟨V, μ₀⟩ + t (z/ε) ‖e‖₁) e^{c_ε t}`.
pub fn lyapunov_bound(v0: f64, t: f64, params: &ModelParams, constants: &LyapunovConstants) -> f64 {
    (v0 + t * params.z * params.epsilon.rate() * constants.e_l1) * (constants.c_epsilon * t).exp()
}

/// Exact `(L_ε V)(γ)` on a one-dimensional torus. Births use the wrapped
/// branching kernel, deaths the minimum-image competition kernels.
pub fn generator_on_v(plus: &[Point], minus: &[Point], params: &ModelParams, spec: &LyapunovSpec) -> Result<f64> {
    let Geometry::Torus { side, dim: 1 } = params.geometry else {
        return Err(Error::Unsupported("generator_on_v needs a one-dimensional torus".into()));
    };
    let g = &params.geometry;
    let period = Some(side);
    let e = |x: &Point| spec.e.eval_r(g.norm(x));
    let xs: Vec<f64> = plus.iter().map(|p| p.0[0]).collect();
    let ys: Vec<f64> = minus.iter().map(|p| p.0[0]).collect();
    let mut total = 0.0;
    // + deaths
    for (i, x) in plus.iter().enumerate() {
        let mut rate = params.m;
        let mut loss = e(x);
        for (j, y) in plus.iter().enumerate() {
            if i != j {
                rate += params.a_minus.eval_r(g.distance(x, y));
                loss += xi(spec, g, x, y)?;
            }
        }
        for w in minus {
            rate += params.g * params.b_minus.eval_r(g.distance(x, w));
            loss += xi(spec, g, x, w)?;
        }
        total -= rate * loss;
    }
    // gain from adding a point at u given the current configuration
    let gain = |u: f64| -> f64 {
        let p = Point::on_line(u);
        let eu = e(&p);
        let mut v = eu;
        for q in plus.iter().chain(minus) {
            let r = g.distance(&p, q);
            if r > 0.0 {
                v += eu * e(q) * spec.h(r);
            }
        }
        v
    };
    let mut breaks: Vec<f64> = xs.iter().chain(&ys).copied().collect();
    breaks.push(0.0);
    // + births
    for &x in &xs {
        let mut b = breaks.clone();
        for r in kernel_breaks(&params.a_plus) {
            b.push(x + r);
        }
        b.push(x);
        total += line_integral(|u| folded(&params.a_plus, u - x, period) * gain(u), &b, spec.kappa, period)?;
    }
    let rate = params.epsilon.rate();
    if rate > 0.0 {
        // − deaths
        for (i, x) in minus.iter().enumerate() {
            let mut loss = e(x);
            for (j, y) in minus.iter().enumerate() {
                if i != j {
                    loss += xi(spec, g, x, y)?;
                }
            }
            for w in plus {
                loss += xi(spec, g, x, w)?;
            }
            total -= rate * loss;
        }
        // − births, thinned by e^{−E_ψ}
        let mut b = breaks.clone();
        for &y in &ys {
            for r in kernel_breaks(&params.psi) {
                b.push(y + r);
            }
        }
        let accept = |u: f64| -> f64 {
            let p = Point::on_line(u);
            let energy: f64 = minus.iter().map(|q| params.psi.eval_r(g.distance(&p, q))).sum();
            (-energy).exp()
        };
        total += params.z * rate * line_integral(|u| accept(u) * gain(u), &b, spec.kappa, period)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::fixtures::torus_model;
    use crate::real::TimeScale;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn exp_weight() -> LyapunovSpec {
        LyapunovSpec::new(Kernel::exponential(1.0, 1.0, 1).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn kappa_range_enforced() {
        let e = Kernel::exponential(1.0, 1.0, 1).unwrap();
        assert!(LyapunovSpec::new(e.clone(), 1.0).is_err());
        assert!(LyapunovSpec::new(e, 0.0).is_err());
        assert!(LyapunovSpec::new(Kernel::exponential(1.0, 1.0, 2).unwrap(), 1.0).is_ok());
    }

    #[test]
    fn exponential_weight_satisfies_condition_l() {
        let p = torus_model(10.0);
        assert!(check_weight_condition(&exp_weight(), &p).is_ok());
        // a⁺ with a fatter tail than e makes a⁺/e non-integrable
        let mut q = p.clone();
        q.a_plus = Kernel::exponential(1.0, 0.5, 1).unwrap();
        q.b_minus = q.b_minus.clone();
        assert!(check_weight_condition(&exp_weight(), &q).is_err());
    }

    #[test]
    fn gaussian_weight_violates_condition_l() {
        // e(x) = e^{-x²}: e(1)e(1) = e^{-2} > e(2) = e^{-4}
        let e = Kernel::gaussian((std::f64::consts::PI).sqrt(), 0.5f64.sqrt(), 1).unwrap();
        let spec = LyapunovSpec::new(e, 0.5).unwrap();
        assert!(check_weight_condition(&spec, &torus_model(10.0)).is_err());
    }

    #[test]
    fn value_examples() {
        let spec = exp_weight();
        let g = Geometry::torus(10.0, 1);
        assert_eq!(lyapunov_value(&[], &[], &spec, &g).unwrap(), 0.0);
        let x = Point::on_line(0.7);
        assert_relative_eq!(lyapunov_value(&[x], &[], &spec, &g).unwrap(), (-0.7f64).exp());
        let y = Point::on_line(1.9);
        let (ex, ey, r) = ((-0.7f64).exp(), (-1.9f64).exp(), 1.2f64);
        let expect = ex + ey + ex * ey * (1.0 + r.sqrt()) / r.sqrt();
        assert_relative_eq!(lyapunov_value(&[x, y], &[], &spec, &g).unwrap(), expect, max_relative = 1e-14);
        assert!(matches!(lyapunov_value(&[x, x], &[], &spec, &g), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn zero_branching_constants_vanish() {
        let mut p = torus_model(10.0);
        p.a_plus = Kernel::zero(1);
        // bypass validation of a⁺ ≠ 0; the constants are still well defined
        let c = lyapunov_constants(&exp_weight(), &p).unwrap();
        assert_eq!(c.c_kappa, 0.0);
        assert_eq!(c.c_prime, 0.0);
    }

    #[test]
    fn tophat_branching_constants_by_quadrature() {
        let mut p = torus_model(10.0);
        p.a_plus = Kernel::tophat(1.0, 0.5, 1).unwrap();
        let spec = exp_weight();
        let c = lyapunov_constants(&spec, &p).unwrap();
        // c_κ = ∫_{-1/2}^{1/2} (1 + |y|^{-1/2}) dy = 1 + 4·sqrt(1/2)
        assert_relative_eq!(c.c_kappa, 1.0 + 4.0 * 0.5f64.sqrt(), max_relative = 1e-8);
        // ‖a⁺/e‖₁ = 2(e^{1/2} − 1)
        assert_relative_eq!(c.a_plus_over_e_l1, 2.0 * (0.5f64.exp() - 1.0), max_relative = 1e-8);
        // c₋ on R with w = 0: ∫ e^{-|x|}(1 + |x|^{-1/2}) = 2 + 2Γ(1/2)
        assert!(c.c_minus >= 2.0 + 2.0 * std::f64::consts::PI.sqrt() - 1e-8);
        assert!(c.c_prime <= c.c_prime_fallback + 1e-9);
        assert!(c.c_epsilon.is_finite() && c.c_epsilon > 0.0);
    }

    #[test]
    fn drift_bound_holds_on_random_configurations() {
        let mut p = torus_model(8.0);
        p.z = 0.8;
        p.epsilon = TimeScale::Finite(0.5);
        p.psi = Kernel::tophat(0.5, 0.3, 1).unwrap();
        let spec = exp_weight();
        let c = lyapunov_constants(&spec, &p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let np = rng.random_range(0..5);
            let nm = rng.random_range(0..5);
            let plus: Vec<Point> = (0..np).map(|_| Point::on_line(rng.random_range(0.0..8.0))).collect();
            let minus: Vec<Point> = (0..nm).map(|_| Point::on_line(rng.random_range(0.0..8.0))).collect();
            let v = lyapunov_value(&plus, &minus, &spec, &p.geometry).unwrap();
            let lv = generator_on_v(&plus, &minus, &p, &spec).unwrap();
            let bound = c.c_epsilon * v + p.z * p.epsilon.rate() * c.e_l1;
            assert!(lv <= bound + 1e-9, "LV = {lv} > {bound}");
        }
    }
}
