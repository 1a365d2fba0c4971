//! Adaptive Gauss–Kronrod (G7/K15) quadrature for real and complex integrands.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

// 15-point Kronrod nodes on [0, 1] half of [-1, 1]; index 0 is the centre.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the embedded 7-point rule (nodes XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values a quadrature rule can accumulate.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Single G7/K15 panel: returns (Kronrod estimate, |K15 − G7|).
pub fn gk15<T: Integrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).magnitude())
}

/// Tolerances and recursion budget for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            max_depth: 40,
        }
    }
}

/// Adaptive bisection on G7/K15 panels until the local error estimate meets
/// the tolerance. Fails when the recursion budget is exhausted or the
/// integrand produces non-finite values.
pub fn integrate<T: Integrand, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (whole, err) = gk15(&mut f, a, b);
    let tol = opts.abs_tol.max(opts.rel_tol * whole.magnitude());
    let value = refine(&mut f, a, b, whole, err, tol, opts.max_depth)?;
    if !value.magnitude().is_finite() {
        return Err(Error::numerical("quadrature produced a non-finite value"));
    }
    Ok(value)
}

fn refine<T: Integrand, F: FnMut(f64) -> T>(
    f: &mut F,
    a: f64,
    b: f64,
    estimate: T,
    err: f64,
    tol: f64,
    depth: u32,
) -> Result<T> {
    if !err.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    if err <= tol {
        return Ok(estimate);
    }
    if depth == 0 {
        return Err(Error::numerical(format!(
            "quadrature did not converge on [{a:e}, {b:e}] (error estimate {err:e})"
        )));
    }
    let mid = 0.5 * (a + b);
    let (left, el) = gk15(f, a, mid);
    let (right, er) = gk15(f, mid, b);
    let half_tol = 0.5 * tol;
    let l = refine(f, a, mid, left, el, half_tol, depth - 1)?;
    let r = refine(f, mid, b, right, er, half_tol, depth - 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let k = 40.0;
        let v = integrate(
            |x: f64| Complex64::new(0.0, k * x).exp(),
            0.0,
            PI,
            QuadOptions::default(),
        )
        .unwrap();
        // ∫ e^{ikx} over [0, π] with even k vanishes.
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn endpoint_singularity_reported() {
        let opts = QuadOptions {
            max_depth: 8,
            ..QuadOptions::default()
        };
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, opts).is_err());
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x: f64| x, 1.0, 1.0, QuadOptions::default()).unwrap(), 0.0);
    }
}
