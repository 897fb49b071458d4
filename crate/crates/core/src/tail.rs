//! Coordinate tail sums: the remainder bound `Σ b_n²·∫_{b_n|y|≤ε} y²ν_n(dy)`
//! and the truncation bounds attached to path metadata.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{DiagonalModel, Sequence};
use crate::series::{series_verdict_from, Evidence, SeriesVerdict, Verdict, NUMERIC_TERMS};
use crate::special::hurwitz_zeta;
use crate::stats::pairwise_sum;

/// `b_n²·trunc_m2(ε/b_n)`, zero when `b_n = 0`.
pub fn remainder_term(model: &DiagonalModel, epsilon: f64, n: usize) -> Result<f64> {
    let b = model.b(n);
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(b * b * model.measure(n)?.truncated_second_moment(epsilon / b)?)
}

/// `b_n = c·n^e` when both `σ` and `z` are power laws.
fn power_b(model: &DiagonalModel) -> Option<(f64, f64)> {
    match (&model.sigma, &model.z) {
        (Sequence::Power { coef: c1, exponent: e1 }, Sequence::Power { coef: c2, exponent: e2 }) => {
            Some(((c1 * c2).abs(), e1 + e2))
        }
        _ => None,
    }
}

fn finite_sum<F: Fn(usize) -> Result<f64>>(from: usize, to: usize, term: F) -> Result<f64> {
    if to < from {
        return Ok(0.0);
    }
    let terms = (from..=to).map(term).collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms))
}

pub(crate) fn closed(value: f64, exponent: f64) -> SeriesVerdict {
    SeriesVerdict {
        verdict: Verdict::Converges,
        value,
        evidence: Evidence::Analytic { exponent },
        detail: "closed form".into(),
    }
}

pub(crate) fn scaled(mut v: SeriesVerdict, k: f64) -> SeriesVerdict {
    if v.value.is_finite() {
        v.value *= k;
    }
    if let Evidence::Numeric { partial_sum, .. } = &mut v.evidence {
        *partial_sum *= k;
    }
    v
}

/// `Σ_{n≥from} b_n^α`.
pub(crate) fn sum_b_alpha(model: &DiagonalModel, alpha: f64, from: usize) -> Result<SeriesVerdict> {
    if let Some(d) = model.dimension() {
        let v = finite_sum(from, d, |n| Ok(model.b(n).powf(alpha)))?;
        return Ok(closed(v, f64::INFINITY));
    }
    if let Some((c, e)) = power_b(model) {
        let s = -alpha * e;
        if c == 0.0 {
            return Ok(closed(0.0, f64::INFINITY));
        }
        if s <= 1.0 {
            return series_verdict_from(from, |_| Ok(1.0), Some(s), 0);
        }
        return Ok(closed(c.powf(alpha) * hurwitz_zeta(s, from as f64), s));
    }
    let hint = model.b_asymptotic().powf(alpha).series_exponent();
    series_verdict_from(from, |n| Ok(model.b(n).powf(alpha)), Some(hint), 0)
}

/// Verdict on `Σ_{n≥from} b_n²·trunc_m2(ε/b_n)`.
///
/// Stable families use the closed form `b_n^α·ε^{2-α}·2C_α/(2-α)` per term;
/// custom families are summed numerically.
pub fn remainder_tail_verdict(model: &DiagonalModel, epsilon: f64, from: usize) -> Result<SeriesVerdict> {
    if !(epsilon > 0.0) {
        return Err(domain("epsilon must be positive"));
    }
    if from == 0 {
        return Err(domain("coordinates are indexed from 1"));
    }
    if let Some(d) = model.dimension() {
        let v = finite_sum(from, d, |n| remainder_term(model, epsilon, n))?;
        return Ok(closed(v, f64::INFINITY));
    }
    if let Some(alpha) = model.stable_alpha() {
        let k = model.measure(1)?.truncated_second_moment(1.0)? * epsilon.powf(2.0 - alpha);
        return Ok(scaled(sum_b_alpha(model, alpha, from)?, k));
    }
    series_verdict_from(from, |n| remainder_term(model, epsilon, n), None, NUMERIC_TERMS)
}

/// `Σ_{n=from}^{to} b_n²·trunc_m2(ε/b_n)`; `to = None` sums to infinity and
/// returns `inf` for a divergent tail.
pub fn remainder_tail_sum(model: &DiagonalModel, epsilon: f64, from: usize, to: Option<usize>) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(domain("epsilon must be positive"));
    }
    if from == 0 {
        return Err(domain("coordinates are indexed from 1"));
    }
    match to {
        Some(to) => finite_sum(from, model.effective_n_max(to), |n| remainder_term(model, epsilon, n)),
        None => verdict_value(remainder_tail_verdict(model, epsilon, from)?),
    }
}

fn verdict_value(v: SeriesVerdict) -> Result<f64> {
    match v.verdict {
        Verdict::Converges => Ok(v.value),
        Verdict::Diverges => Ok(f64::INFINITY),
        Verdict::Inconclusive => Err(Error::Quadrature(format!("tail sum undecided: {}", v.detail))),
    }
}

/// Bounds on what a `(δ, n_max)` truncation leaves out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationBounds {
    /// `Σ_{n≤n_max} b_n²·trunc_m2(δ/b_n)`: second moment of the dropped small jumps per unit time.
    pub small_jump_l2: f64,
    /// `Σ_{n>n_max} b_n²·trunc_m2(δ/b_n)`; `None` when undecided.
    pub omitted_l2: Option<f64>,
    /// Expected number of jumps with `b_n·y >= δ` in coordinates `n > n_max` over the horizon.
    pub omitted_jump_rate: Option<f64>,
}

pub fn truncation_bounds(model: &DiagonalModel, delta: f64, n_max: usize) -> Result<TruncationBounds> {
    let n_eff = model.effective_n_max(n_max);
    let small_jump_l2 = remainder_tail_sum(model, delta, 1, Some(n_eff))?;
    let omitted_l2 = remainder_tail_sum(model, delta, n_eff + 1, None).ok();
    let omitted_jump_rate = omitted_jump_rate(model, delta, n_eff + 1).ok();
    Ok(TruncationBounds {
        small_jump_l2,
        omitted_l2,
        omitted_jump_rate,
    })
}

fn omitted_jump_rate(model: &DiagonalModel, delta: f64, from: usize) -> Result<f64> {
    let h2 = 2.0 * model.horizon;
    let term = |n: usize| {
        let b = model.b(n);
        if b == 0.0 {
            Ok(0.0)
        } else {
            Ok(h2 * model.measure(n)?.tail_mass(delta / b)?)
        }
    };
    if let Some(d) = model.dimension() {
        return finite_sum(from, d, term);
    }
    if let Some(alpha) = model.stable_alpha() {
        let k = h2 * model.measure(1)?.tail_mass(delta)?;
        return verdict_value(scaled(sum_b_alpha(model, alpha, from)?, k));
    }
    verdict_value(series_verdict_from(from, term, None, NUMERIC_TERMS)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::LevyMeasure;
    use std::f64::consts::PI;

    #[test]
    fn stable_one_inverse_square() {
        let m = DiagonalModel::with_b(LevyMeasure::stable(1.0).unwrap(), Sequence::power(1.0, -2.0), Sequence::power(1.0, 1.0)).unwrap();
        let v = remainder_tail_sum(&m, 1.0, 1, None).unwrap();
        assert!((v - PI / 3.0).abs() < 1e-12);
        let partial = remainder_tail_sum(&m, 1.0, 1, Some(1_000_000)).unwrap();
        assert!((partial - PI / 3.0).abs() < 1e-6);
    }

    #[test]
    fn divergent_tail_is_infinite() {
        let m = DiagonalModel::with_b(LevyMeasure::stable(1.0).unwrap(), Sequence::power(1.0, -1.0), Sequence::power(1.0, 1.0)).unwrap();
        assert!(remainder_tail_sum(&m, 1.0, 1, None).unwrap().is_infinite());
    }

    #[test]
    fn zero_b_gives_zero() {
        let m = DiagonalModel::with_b(LevyMeasure::stable(1.5).unwrap(), Sequence::Table(vec![0.0; 4]), Sequence::power(1.0, 1.0)).unwrap();
        assert_eq!(remainder_tail_sum(&m, 0.3, 1, None).unwrap(), 0.0);
    }

    #[test]
    fn windowed_sum_matches_terms() {
        let m = DiagonalModel::stable_power(1.5, 1.0, 1.0, 0.5, 1.0).unwrap();
        let w = remainder_tail_sum(&m, 0.1, 3, Some(20)).unwrap();
        let direct: f64 = (3..=20).map(|n| remainder_term(&m, 0.1, n).unwrap()).sum();
        assert!((w - direct).abs() < 1e-14 * direct);
        let all = remainder_tail_sum(&m, 0.1, 1, None).unwrap();
        let split = remainder_tail_sum(&m, 0.1, 1, Some(20)).unwrap() + remainder_tail_sum(&m, 0.1, 21, None).unwrap();
        assert!((all - split).abs() < 1e-12 * all);
    }

    #[test]
    fn custom_tail_numeric() {
        use crate::measure::{StableMeasure, TabulatedMeasure};
        let t = TabulatedMeasure::from_stable(&StableMeasure::new(1.0).unwrap(), 1e-3, 1e14, 400).unwrap();
        let m = DiagonalModel::with_b(LevyMeasure::custom(t), Sequence::power(1.0, -2.0), Sequence::power(1.0, 1.0)).unwrap();
        let v = remainder_tail_verdict(&m, 1.0, 1).unwrap();
        assert_eq!(v.verdict, Verdict::Converges);
        assert!((v.value - PI / 3.0).abs() < 1e-5);
    }
}
