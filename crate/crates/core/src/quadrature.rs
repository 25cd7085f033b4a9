//! Adaptive Gauss–Kronrod (7/15) quadrature with global bisection, plus the
//! transforms needed for half-lines and integrable power singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-14, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if b < a {
        let e = integrate(f, b, a, tol)?;
        return Ok(Estimate { value: -e.value, error: e.error });
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if parts.len() >= tol.max_intervals || !total.is_finite() {
            return Err(Error::QuadratureFailed { lo: a, hi: b, error: total_err });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            return Err(Error::QuadratureFailed { lo: a, hi: b, error: total_err });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - v0;
        total_err += e1 + e2 - e0;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // recompute sums to shed accumulated cancellation in the running totals
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Ok(Estimate { value, error })
}

/// Integrates `f` over `[a, ∞)` via `x = a + u/(1-u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `[a, b]` where `f(x) ~ (x-a)^s` near `a`, `s > -1`.
/// The substitution `x = a + (b-a) u^p`, `p = 1/(1+s)`, removes the
/// singularity at the left end.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if s <= -1.0 {
        return Err(Error::DivergentNorm(format!("power singularity exponent {s} <= -1")));
    }
    if s >= 0.0 {
        return integrate(f, a, b, tol);
    }
    let p = 1.0 / (1.0 + s);
    let width = b - a;
    integrate(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let x = a + width * u.powf(p);
            f(x) * width * p * u.powf(p - 1.0)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `[a, b]` with power singularities of exponent `s`
/// allowed at both ends.
pub fn integrate_both_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let mid = 0.5 * (a + b);
    let left = integrate_left_singular(&f, a, mid, s, tol)?;
    // mirror the right half so its singular end sits on the left
    let right = integrate_left_singular(|y| f(a + b - y), a, mid, s, tol)?;
    Ok(Estimate { value: left.value + right.value, error: left.error + right.error })
}

/// Integrates over the whole real line split at the sorted `breaks`,
/// treating every break point as a possible power singularity of exponent `s`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    s: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(0.0);
    }
    let first = pts[0];
    let last = *pts.last().expect("non-empty");
    let mut value = 0.0;
    let mut error = 0.0;
    // tails: a unit stretch handles the singularity, the remainder is smooth
    let left_near = integrate_left_singular(|y| f(first - y), 0.0, 1.0, s, tol)?;
    let left_far = integrate_to_infinity(|y| f(first - y), 1.0, tol)?;
    let right_near = integrate_left_singular(|y| f(last + y), 0.0, 1.0, s, tol)?;
    let right_far = integrate_to_infinity(|y| f(last + y), 1.0, tol)?;
    for e in [left_near, left_far, right_near, right_far] {
        value += e.value;
        error += e.error;
    }
    for w in pts.windows(2) {
        let e = integrate_both_singular(&f, w[0], w[1], s, tol)?;
        value += e.value;
        error += e.error;
    }
    Ok(Estimate { value, error })
}

/// Surface area of the unit sphere in `R^d`, `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => unit_sphere_area(d - 2) * 2.0 * std::f64::consts::PI / (d as f64 - 2.0),
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    unit_sphere_area(d) / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(e.value, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn gaussian_half_line() {
        let e = integrate_to_infinity(|x| (-x * x).exp(), 0.0, Tolerance::default()).unwrap();
        assert_relative_eq!(e.value, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let e = integrate_left_singular(|x| x.powf(-0.5), 0.0, 1.0, -0.5, Tolerance::default())
            .unwrap();
        assert_relative_eq!(e.value, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn real_line_with_interior_singularity() {
        // ∫ e^{-|x|} |x-1|^{-1/2} dx, reference by splitting by hand
        let f = |x: f64| (-x.abs()).exp() * (x - 1.0).abs().powf(-0.5);
        let e = integrate_real_line(f, &[0.0, 1.0], -0.5, Tolerance::default()).unwrap();
        // closed form: ∫_1^∞ e^{-x}(x-1)^{-1/2} = e^{-1}√π ; the rest by a finer split
        let tail = (-1.0f64).exp() * std::f64::consts::PI.sqrt();
        let mid = integrate_both_singular(f, 0.0, 1.0, -0.5, Tolerance::default()).unwrap().value;
        let left = integrate_to_infinity(|y| f(-y), 0.0, Tolerance::default()).unwrap().value;
        assert_relative_eq!(e.value, tail + mid + left, max_relative = 1e-9);
    }

    #[test]
    fn sphere_constants() {
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(1), 2.0);
    }
}
