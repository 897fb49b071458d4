//! Regularity criteria for the projected process and for `X` itself.
//!
//! Stable families are decided by p-series exponents; custom families fall
//! back on the numeric rule of [`crate::series`].

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::DiagonalModel;
use crate::series::{series_verdict_from, Evidence, SeriesVerdict, Verdict, NUMERIC_TERMS};
use crate::tail::{closed, remainder_tail_verdict, scaled, sum_b_alpha};

pub use crate::series::series_verdict;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

fn finite_or_numeric<F: Fn(usize) -> Result<f64>>(model: &DiagonalModel, term: F) -> Result<SeriesVerdict> {
    match model.dimension() {
        Some(d) => {
            let v = (1..=d).map(&term).collect::<Result<Vec<_>>>()?;
            Ok(closed(crate::stats::pairwise_sum(&v), f64::INFINITY))
        }
        None => series_verdict_from(1, term, None, NUMERIC_TERMS),
    }
}

/// `Σ_n ν_n([ε/b_n, ∞)) < ∞`, necessary for a càdlàg modification of `Y`.
pub fn necessary_condition(model: &DiagonalModel, epsilon: f64) -> Result<SeriesVerdict> {
    check_epsilon(epsilon)?;
    if let (Some(alpha), None) = (model.stable_alpha(), model.dimension()) {
        let k = model.measure(1)?.tail_mass(epsilon)?;
        return Ok(scaled(sum_b_alpha(model, alpha, 1)?, k));
    }
    finite_or_numeric(model, |n| {
        let b = model.b(n);
        if b == 0.0 {
            Ok(0.0)
        } else {
            model.measure(n)?.tail_mass(epsilon / b)
        }
    })
}

/// `Σ_n b_n²·∫_{b_n|y|≤ε} y²ν_n(dy) < ∞`, sufficient together with the necessary condition.
pub fn sufficient_condition(model: &DiagonalModel, epsilon: f64) -> Result<SeriesVerdict> {
    check_epsilon(epsilon)?;
    remainder_tail_verdict(model, epsilon, 1)
}

/// `Σ_n ∫ (|b_n y|² ∧ 1) ν_n(dy)`, computed as `b_n²·trunc_m2(1/b_n) + 2·ν_n([1/b_n, ∞))`.
pub fn combined_form(model: &DiagonalModel) -> Result<SeriesVerdict> {
    if let (Some(alpha), None) = (model.stable_alpha(), model.dimension()) {
        let m = model.measure(1)?;
        let k = m.truncated_second_moment(1.0)? + 2.0 * m.tail_mass(1.0)?;
        return Ok(scaled(sum_b_alpha(model, alpha, 1)?, k));
    }
    finite_or_numeric(model, |n| {
        let b = model.b(n);
        if b == 0.0 {
            return Ok(0.0);
        }
        let m = model.measure(n)?;
        Ok(b * b * m.truncated_second_moment(1.0 / b)? + 2.0 * m.tail_mass(1.0 / b)?)
    })
}

fn inconclusive(detail: &str) -> SeriesVerdict {
    SeriesVerdict {
        verdict: Verdict::Inconclusive,
        value: f64::NAN,
        evidence: Evidence::Numeric {
            partial_sum: f64::NAN,
            terms: 0,
            fitted_exponent: f64::NAN,
        },
        detail: detail.into(),
    }
}

/// `Σ_n s_n^k·w_n` with hint from the growth classes of `s` and `w`.
fn sigma_series<W>(model: &DiagonalModel, k: f64, weight: W, weight_class: crate::model::Asymptotic) -> Result<SeriesVerdict>
where
    W: Fn(usize) -> f64,
{
    let term = |n: usize| Ok(model.sigma(n).abs().powf(k) * weight(n));
    if model.sigma.table_len().is_some() {
        let len = model.sigma.table_len().unwrap();
        let v = (1..=len).map(term).collect::<Result<Vec<_>>>()?;
        return Ok(closed(crate::stats::pairwise_sum(&v), f64::INFINITY));
    }
    let hint = model.sigma_asymptotic().powf(k).times(weight_class).series_exponent();
    series_verdict_from(1, term, Some(hint), 0)
}

const UNIT: crate::model::Asymptotic = crate::model::Asymptotic::Rate { rho: 1.0, exp: 0.0 };

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub epsilon: f64,
    pub alpha: Option<f64>,
    pub necessary: SeriesVerdict,
    pub sufficient: SeriesVerdict,
    pub combined_form: SeriesVerdict,
    pub stable_dichotomy: SeriesVerdict,
    pub h_valued: SeriesVerdict,
    pub h_cadlag: SeriesVerdict,
    pub cylindrical: SeriesVerdict,
    pub classification: String,
    pub flags: Vec<String>,
}

pub const NOT_H_VALUED: &str = "not H-valued";
pub const NOT_CYLINDRICAL: &str = "H-valued but not cylindrically càdlàg";
pub const CYLINDRICAL_ONLY: &str = "cylindrically càdlàg but not H-càdlàg";
pub const H_CADLAG: &str = "H-càdlàg";
pub const UNDETERMINED: &str = "undetermined";

/// All criteria at `ε = 1`.
pub fn classify(model: &DiagonalModel) -> Result<CriteriaReport> {
    classify_at(model, 1.0)
}

/// All criteria, with the per-`z` conditions evaluated at `ε`.
pub fn classify_at(model: &DiagonalModel, epsilon: f64) -> Result<CriteriaReport> {
    let necessary = necessary_condition(model, epsilon)?;
    let sufficient = sufficient_condition(model, epsilon)?;
    let combined = combined_form(model)?;
    let alpha = model.stable_alpha();
    let (stable_dichotomy, h_valued, h_cadlag, cylindrical) = match alpha {
        Some(a) => {
            let gamma_class = model.gamma_asymptotic().one_plus_recip();
            (
                sum_b_alpha(model, a, 1)?,
                sigma_series(model, a, |n| 1.0 / (1.0 + model.gamma(n)), gamma_class)?,
                sigma_series(model, a, |_| 1.0, UNIT)?,
                sigma_series(model, 2.0 * a / (2.0 - a), |_| 1.0, UNIT)?,
            )
        }
        None => {
            let why = "exponent rule needs a common stable family";
            (inconclusive(why), inconclusive(why), inconclusive(why), inconclusive(why))
        }
    };
    let mut flags = Vec::new();
    use Verdict::*;
    let classification = match (h_valued.verdict, h_cadlag.verdict, cylindrical.verdict) {
        (Diverges, _, _) => NOT_H_VALUED,
        (Converges, Converges, _) => H_CADLAG,
        (Converges, Diverges, Converges) => CYLINDRICAL_ONLY,
        (Converges, _, Diverges) => NOT_CYLINDRICAL,
        _ => UNDETERMINED,
    };
    if cylindrical.verdict == Converges && h_valued.verdict != Converges {
        flags.push("cylindrical exponent series converges while the H-valued condition does not hold".into());
    }
    let per_z = [&necessary, &sufficient, &combined, &stable_dichotomy];
    if alpha.is_some() && per_z.iter().any(|v| v.verdict != necessary.verdict) {
        flags.push("per-z verdicts disagree".into());
    }
    Ok(CriteriaReport {
        epsilon,
        alpha,
        necessary,
        sufficient,
        combined_form: combined,
        stable_dichotomy,
        h_valued,
        h_cadlag,
        cylindrical,
        classification: classification.into(),
        flags,
    })
}

impl CriteriaReport {
    fn entries(&self) -> [(&'static str, &SeriesVerdict); 7] {
        [
            ("necessary", &self.necessary),
            ("sufficient", &self.sufficient),
            ("combined_form", &self.combined_form),
            ("stable_dichotomy", &self.stable_dichotomy),
            ("h_valued", &self.h_valued),
            ("h_cadlag", &self.h_cadlag),
            ("cylindrical", &self.cylindrical),
        ]
    }

    /// Whether the projected process has a càdlàg modification, if decided.
    pub fn y_cadlag(&self) -> Option<bool> {
        match (self.necessary.verdict, self.sufficient.verdict) {
            (Verdict::Diverges, _) => Some(false),
            (Verdict::Converges, Verdict::Converges) => Some(true),
            _ => None,
        }
    }

    /// `key: value` lines followed by a `#` summary block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "classification: {}", self.classification);
        let _ = writeln!(out, "epsilon: {:e}", self.epsilon);
        match self.alpha {
            Some(a) => {
                let _ = writeln!(out, "alpha: {a:e}");
            }
            None => out.push_str("alpha: none\n"),
        }
        for (key, v) in self.entries() {
            let _ = writeln!(out, "{key}.verdict: {}", v.verdict);
            let _ = writeln!(out, "{key}.value: {:e}", v.value);
            match &v.evidence {
                Evidence::Analytic { exponent } => {
                    let _ = writeln!(out, "{key}.evidence: analytic exponent={exponent:e}");
                }
                Evidence::Numeric {
                    partial_sum,
                    terms,
                    fitted_exponent,
                } => {
                    let _ = writeln!(
                        out,
                        "{key}.evidence: numeric partial_sum={partial_sum:e} terms={terms} fitted_exponent={fitted_exponent:e}"
                    );
                }
            }
            let _ = writeln!(out, "{key}.detail: {}", v.detail);
        }
        for f in &self.flags {
            let _ = writeln!(out, "flag: {f}");
        }
        out.push_str("#\n");
        let _ = writeln!(out, "# X is {}.", self.classification);
        let y = match self.y_cadlag() {
            Some(true) => "has",
            Some(false) => "has no",
            None => "may or may not have",
        };
        let _ = writeln!(out, "# <X, z> {y} a cadlag modification.");
        out
    }
}
