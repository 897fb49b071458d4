//! Adaptive Gauss–Kronrod quadrature (7-point Gauss, 15-point Kronrod).
//!
//! Globally adaptive: the interval with the largest error estimate is
//! bisected until the summed estimate meets the tolerance.

#![allow(clippy::excessive_precision)]

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

/// Requested accuracy: converged when `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_intervals: 20_000,
        }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 20_000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).abs(),
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut panels = vec![kronrod(&mut f, lo, hi)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate { value: sign * value, error });
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence after {} intervals (estimate {value}, error {error})",
                panels.len()
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let worst = panels.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval collapsed to machine resolution
            return Ok(Estimate {
                value: sign * value,
                error,
            });
        }
        panels.push(kronrod(&mut f, worst.a, mid));
        panels.push(kronrod(&mut f, mid, worst.b));
    }
}

/// Integrate `f` over `[a, inf)` through the map `x = a + s / (1 - s)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    integrate(
        |s| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrate over `[a, b]` after splitting at the supplied breakpoints.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tolerance) -> Result<Estimate> {
    let mut total = Estimate { value: 0.0, error: 0.0 };
    for w in breaks.windows(2) {
        let e = integrate(&mut f, w[0], w[1], tol)?;
        total.value += e.value;
        total.error += e.error;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((e.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let e = integrate(|x| x.exp(), 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((e.value + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_exponential() {
        let e = integrate_to_infinity(|x| (-x).exp(), 0.0, Tolerance::rel(1e-12)).unwrap();
        assert!((e.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let e = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::rel(1e-9)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn jump_discontinuity() {
        let e = integrate(|x| if x <= 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((e.value - 0.3).abs() < 1e-11);
    }
}
