//! The exponent `ψ(θ, t)` with `E e^{iθY_t} = e^{-ψ(θ,t)}`:
//! `ψ(θ, t) = Σ_n ∫₀ᵗ ∫ (1 - cos(θ b_n y e^{-γ_n s})) ν_n(dy) ds`.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{LevyMeasure, TabulatedMeasure};
use crate::model::DiagonalModel;
use crate::quad::{integrate, integrate_pieces, Estimate, Tolerance};
use crate::series::{series_verdict_from, SeriesVerdict, Verdict, EXPONENT_MARGIN};
use crate::stats::pairwise_sum;
use crate::tail::{closed, remainder_term};

/// Coordinates summed by quadrature for custom measures.
pub const PSI_COORDINATE_CUTOFF: usize = 1024;
/// Periods of `cos(cy)` resolved before the oscillation is averaged out.
const RESOLVED_PERIODS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    /// `value` includes `tail_estimate`, the extrapolated share of coordinates past the cutoff.
    Finite { value: f64, tail_estimate: f64 },
    Infinite,
}

impl Psi {
    pub fn value(&self) -> f64 {
        match self {
            Psi::Finite { value, .. } => *value,
            Psi::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Psi::Finite { .. })
    }
}

fn check_time(model: &DiagonalModel, t: f64) -> Result<()> {
    if !(t > 0.0) || t > model.horizon {
        return Err(domain(format!("t = {t} outside (0, {}]", model.horizon)));
    }
    Ok(())
}

/// `b_n^α·(1 - e^{-αγ_n t})/(αγ_n)`.
fn stable_term(model: &DiagonalModel, alpha: f64, t: f64, n: usize) -> f64 {
    let b = model.b(n);
    if b == 0.0 {
        return 0.0;
    }
    let ag = alpha * model.gamma(n);
    b.powf(alpha) * -(-ag * t).exp_m1() / ag
}

/// `Σ_n b_n^α·(1 - e^{-αγ_n t})/(αγ_n)`, so that `ψ(θ, t) = |θ|^α` times this value.
pub fn stable_psi_coefficient(model: &DiagonalModel, t: f64) -> Result<SeriesVerdict> {
    check_time(model, t)?;
    let alpha = model
        .stable_alpha()
        .ok_or_else(|| domain("closed-form ψ needs a common stable family"))?;
    let term = |n| Ok(stable_term(model, alpha, t, n));
    if let Some(d) = model.dimension() {
        let terms = (1..=d).map(|n| stable_term(model, alpha, t, n)).collect::<Vec<_>>();
        return Ok(closed(pairwise_sum(&terms), f64::INFINITY));
    }
    let hint = model
        .b_asymptotic()
        .powf(alpha)
        .times(model.gamma_asymptotic().one_plus_recip())
        .series_exponent();
    series_verdict_from(1, term, Some(hint), 0)
}

/// `∫ (1 - cos(c·y)) ν(dy)` over both half-lines.
pub fn cos_exponent(measure: &LevyMeasure, c: f64) -> Result<Estimate> {
    let c = c.abs();
    if c == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    match measure {
        LevyMeasure::Stable(s) => Ok(Estimate {
            value: c.powf(s.alpha()),
            error: 0.0,
        }),
        LevyMeasure::Custom(t) => tabulated_cos_exponent(t, c),
    }
}

/// Quadrature over the table range; below it `1 - cos` is replaced by its
/// quadratic term, past `RESOLVED_PERIODS` periods and above the table the
/// cosine is averaged to zero. The error field bounds all three.
fn tabulated_cos_exponent(t: &TabulatedMeasure, c: f64) -> Result<Estimate> {
    let (lo, hi) = t.range();
    let m2_lo = t.trunc_m2(lo)?;
    let below = 0.5 * c * c * m2_lo;
    let below_err = c.powi(4) * lo * lo * m2_lo / 24.0;
    let y_osc = (RESOLVED_PERIODS * 2.0 * PI / c).clamp(lo, hi);
    let mut breaks = vec![lo];
    breaks.extend(t.nodes().iter().copied().filter(|&u| u > lo && u < y_osc));
    breaks.push(y_osc);
    let failure = Cell::new(None);
    let integrand = |y: f64| match t.density(y) {
        Ok(d) => {
            let s = (0.5 * c * y).sin();
            4.0 * s * s * d
        }
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let mid = if y_osc > lo {
        integrate_pieces(integrand, &breaks, Tolerance::new(1e-15, 1e-10))?
    } else {
        Estimate { value: 0.0, error: 0.0 }
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let (t_osc, t_hi) = (t.tail(y_osc)?, t.tail(hi)?);
    let osc = 2.0 * (t_osc - t_hi);
    let osc_err = if y_osc < hi { 4.0 * t.density(y_osc)? / c } else { 0.0 };
    Ok(Estimate {
        value: below + mid.value + osc + 2.0 * t_hi,
        error: below_err + mid.error + osc_err + 2.0 * t_hi,
    })
}

/// `ψ_n(θ, t)` for one coordinate.
pub fn psi_coordinate(model: &DiagonalModel, n: usize, theta: f64, t: f64) -> Result<f64> {
    check_time(model, t)?;
    let b = model.b(n);
    if b == 0.0 || theta == 0.0 {
        return Ok(0.0);
    }
    let measure = model.measure(n)?;
    if let Some(alpha) = measure.alpha() {
        return Ok(theta.abs().powf(alpha) * stable_term(model, alpha, t, n));
    }
    let gamma = model.gamma(n);
    let failure = Cell::new(None);
    let est = integrate(
        |s| match cos_exponent(measure, theta * b * (-gamma * s).exp()) {
            Ok(e) => e.value,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        },
        0.0,
        t,
        Tolerance::new(1e-15, 1e-8),
    )?;
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(est.value),
    }
}

/// `ψ(θ, t)`.
///
/// Common stable families use the closed form with the convergence verdict
/// of `Σ b_n^α/(1 + γ_n)`. Otherwise coordinates up to
/// [`PSI_COORDINATE_CUTOFF`] are integrated numerically and the rest is
/// extrapolated from the decay of the last two dyadic blocks.
pub fn psi(model: &DiagonalModel, theta: f64, t: f64) -> Result<Psi> {
    check_time(model, t)?;
    if theta == 0.0 {
        return Ok(Psi::Finite {
            value: 0.0,
            tail_estimate: 0.0,
        });
    }
    if let Some(alpha) = model.stable_alpha() {
        let v = stable_psi_coefficient(model, t)?;
        return Ok(match v.verdict {
            Verdict::Converges => Psi::Finite {
                value: theta.abs().powf(alpha) * v.value,
                tail_estimate: 0.0,
            },
            _ => Psi::Infinite,
        });
    }
    let n_max = model.effective_n_max(PSI_COORDINATE_CUTOFF);
    let terms = (1..=n_max).map(|n| psi_coordinate(model, n, theta, t)).collect::<Result<Vec<_>>>()?;
    let total = pairwise_sum(&terms);
    if model.dimension().is_some_and(|d| d <= PSI_COORDINATE_CUTOFF) {
        return Ok(Psi::Finite {
            value: total,
            tail_estimate: 0.0,
        });
    }
    let s1 = pairwise_sum(&terms[n_max / 4..n_max / 2]);
    let s2 = pairwise_sum(&terms[n_max / 2..]);
    if s2 == 0.0 {
        return Ok(Psi::Finite {
            value: total,
            tail_estimate: 0.0,
        });
    }
    let r = 1.0 - (s2 / s1).log2();
    if r < 1.0 - EXPONENT_MARGIN {
        return Ok(Psi::Infinite);
    }
    if r <= 1.0 + EXPONENT_MARGIN {
        return Err(Error::Quadrature(format!("ψ coordinate series undecided, fitted exponent {r:.4}")));
    }
    // blocks of c·n^{-r}: Σ_{n>N} ≈ S_{[N/2,N)} / (2^{r-1} - 1)
    let tail = s2 / ((r - 1.0).exp2() - 1.0);
    Ok(Psi::Finite {
        value: total + tail,
        tail_estimate: tail,
    })
}

/// Truncation `(δ, n_max)` whose ψ deficit at `(θ, t)` is below `rel·ψ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationChoice {
    pub delta: f64,
    pub n_max: usize,
    pub psi: f64,
    /// `|θ|^α·Σ_{n>n_max} b_n^α(1 - e^{-αγ_n t})/(αγ_n)`.
    pub coordinate_deficit: f64,
    /// `θ²/2·Σ_{n≤n_max} (1 - e^{-2γ_n t})/(2γ_n)·b_n²·trunc_m2(δ/b_n)`, an upper bound.
    pub small_jump_deficit: f64,
}

/// Halves `δ` or doubles `n_max`, whichever deficit dominates, until the
/// total deficit at `|θ| = theta_max` drops below `rel·ψ`.
pub fn ecf_truncation(model: &DiagonalModel, theta_max: f64, t: f64, rel: f64) -> Result<TruncationChoice> {
    let alpha = model
        .stable_alpha()
        .ok_or_else(|| domain("truncation choice needs a common stable family"))?;
    if !(theta_max > 0.0) || !(rel > 0.0) {
        return Err(domain("theta_max and rel must be positive"));
    }
    let total = stable_psi_coefficient(model, t)?;
    if !total.converges() {
        return Err(Error::Assumption("ψ is infinite for this model".into()));
    }
    let scale = theta_max.powf(alpha);
    let psi = scale * total.value;
    let (mut delta, mut n_max) = (1.0, 8usize);
    for _ in 0..200 {
        let n_eff = model.effective_n_max(n_max);
        let partial = pairwise_sum(&(1..=n_eff).map(|n| stable_term(model, alpha, t, n)).collect::<Vec<_>>());
        let coordinate_deficit = scale * (total.value - partial).max(0.0);
        let mut small = Vec::with_capacity(n_eff);
        for n in 1..=n_eff {
            let g2 = 2.0 * model.gamma(n);
            small.push(-(-g2 * t).exp_m1() / g2 * remainder_term(model, delta, n)?);
        }
        let small_jump_deficit = 0.5 * theta_max * theta_max * pairwise_sum(&small);
        if coordinate_deficit + small_jump_deficit < rel * psi {
            return Ok(TruncationChoice {
                delta,
                n_max: n_eff,
                psi,
                coordinate_deficit,
                small_jump_deficit,
            });
        }
        if coordinate_deficit >= small_jump_deficit {
            n_max *= 2;
        } else {
            delta *= 0.5;
        }
    }
    Err(Error::Quadrature("truncation refinement did not reach the requested deficit".into()))
}
