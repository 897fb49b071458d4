//! Convergence verdicts for series of nonnegative terms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::special::hurwitz_zeta;
use crate::stats::pairwise_sum;

/// Partial-sum length for hint-free verdicts.
pub const NUMERIC_TERMS: usize = 1_000_000;
/// Partial-sum length before the analytic tail is attached.
pub const ANALYTIC_TERMS: usize = 100_000;
/// Half-width of the undecided band around the critical exponent 1.
pub const EXPONENT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// p-series exponent `r` of terms `≍ n^{-r}` (`inf` for geometric decay).
    Analytic { exponent: f64 },
    /// Partial sum to `terms` and the decay exponent fitted on the last two dyadic blocks.
    Numeric {
        partial_sum: f64,
        terms: usize,
        fitted_exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub verdict: Verdict,
    /// Estimate of the sum, `inf` when divergent.
    pub value: f64,
    pub evidence: Evidence,
    pub detail: String,
}

impl SeriesVerdict {
    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }

    fn inconclusive(detail: String) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            value: f64::NAN,
            evidence: Evidence::Numeric {
                partial_sum: f64::NAN,
                terms: 0,
                fitted_exponent: f64::NAN,
            },
            detail,
        }
    }
}

fn checked(n: usize, v: f64) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        Err(contract(format!("series term {n} is {v}; terms must be nonnegative")))
    } else {
        Ok(v)
    }
}

/// Verdict on `Σ_{n≥1} terms(n)`; see [`series_verdict_from`].
pub fn series_verdict<F>(terms: F, analytic_hint: Option<f64>) -> Result<SeriesVerdict>
where
    F: Fn(usize) -> Result<f64>,
{
    series_verdict_from(1, terms, analytic_hint, NUMERIC_TERMS)
}

/// Verdict on `Σ_{n≥from} terms(n)`.
///
/// With a hint `r` (terms `≍ c·n^{-r}`) the verdict is exact: converges iff
/// `r > 1`, and the value is a partial sum plus a Hurwitz-zeta tail fitted
/// to the last term. Without a hint the series is summed to `numeric_terms`
/// and the decay exponent is read off the last two dyadic blocks; the
/// verdict is decided only outside `1 ± EXPONENT_MARGIN`.
///
/// A term closure error (e.g. a table queried out of range) makes the
/// hint-free verdict inconclusive; with a hint it is propagated.
pub fn series_verdict_from<F>(from: usize, terms: F, analytic_hint: Option<f64>, numeric_terms: usize) -> Result<SeriesVerdict>
where
    F: Fn(usize) -> Result<f64>,
{
    match analytic_hint {
        Some(r) => analytic(from, &terms, r),
        None => match numeric(from, &terms, numeric_terms) {
            Err(Error::Contract(msg)) => Err(Error::Contract(msg)),
            Err(e) => Ok(SeriesVerdict::inconclusive(format!("terms could not be evaluated: {e}"))),
            Ok(v) => Ok(v),
        },
    }
}

fn analytic<F: Fn(usize) -> Result<f64>>(from: usize, terms: &F, r: f64) -> Result<SeriesVerdict> {
    if r <= 1.0 {
        return Ok(SeriesVerdict {
            verdict: Verdict::Diverges,
            value: f64::INFINITY,
            evidence: Evidence::Analytic { exponent: r },
            detail: format!("p-series with exponent {r} <= 1"),
        });
    }
    let mut acc = Vec::with_capacity(1024);
    let mut total = 0.0;
    let mut n = from;
    let end = from + ANALYTIC_TERMS;
    let mut last = 0.0;
    let mut last_n = from;
    while n < end {
        last = checked(n, terms(n)?)?;
        last_n = n;
        acc.push(last);
        if acc.len() == 1024 {
            total += pairwise_sum(&acc);
            acc.clear();
        }
        if r.is_infinite() && last <= 1e-18 * (total + pairwise_sum(&acc)) {
            break;
        }
        n += 1;
    }
    total += pairwise_sum(&acc);
    let tail = if r.is_finite() && last > 0.0 {
        // last ≈ K n^{-r}; tail = K ζ(r, n + 1)
        let k = last * (last_n as f64).powf(r);
        k * hurwitz_zeta(r, last_n as f64 + 1.0)
    } else {
        0.0
    };
    Ok(SeriesVerdict {
        verdict: Verdict::Converges,
        value: total + tail,
        evidence: Evidence::Analytic { exponent: r },
        detail: if r.is_infinite() {
            "geometric or eventually vanishing terms".into()
        } else {
            format!("p-series with exponent {r} > 1")
        },
    })
}

fn numeric<F: Fn(usize) -> Result<f64>>(from: usize, terms: &F, n_terms: usize) -> Result<SeriesVerdict> {
    let n_terms = n_terms.max(8);
    let last = from + n_terms - 1;
    let q1 = from + n_terms / 4;
    let q2 = from + n_terms / 2;
    let mut head = Vec::with_capacity(q1 - from);
    let mut block1 = Vec::with_capacity(q2 - q1);
    let mut block2 = Vec::with_capacity(last + 1 - q2);
    for n in from..=last {
        let v = checked(n, terms(n)?)?;
        if n < q1 {
            head.push(v);
        } else if n < q2 {
            block1.push(v);
        } else {
            block2.push(v);
        }
    }
    let (s0, s1, s2) = (pairwise_sum(&head), pairwise_sum(&block1), pairwise_sum(&block2));
    let partial = s0 + s1 + s2;
    let fitted = if s1 == 0.0 && s2 == 0.0 {
        f64::INFINITY
    } else if s1 == 0.0 {
        f64::NEG_INFINITY
    } else {
        // block sums of c n^{-r} over [N/4, N/2) and [N/2, N) scale by 2^{1-r}
        1.0 - (s2 / s1).log2()
    };
    let verdict = if fitted > 1.0 + EXPONENT_MARGIN {
        Verdict::Converges
    } else if fitted < 1.0 - EXPONENT_MARGIN {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    let value = match verdict {
        Verdict::Converges => partial,
        Verdict::Diverges => f64::INFINITY,
        Verdict::Inconclusive => partial,
    };
    Ok(SeriesVerdict {
        verdict,
        value,
        evidence: Evidence::Numeric {
            partial_sum: partial,
            terms: n_terms,
            fitted_exponent: fitted,
        },
        detail: format!("fitted decay exponent {fitted:.4} from {n_terms} terms (margin {EXPONENT_MARGIN})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_two_numeric() {
        let v = series_verdict(|n| Ok((n as f64).powi(-2)), None).unwrap();
        assert_eq!(v.verdict, Verdict::Converges);
        assert!((v.value - PI * PI / 6.0).abs() < 1e-6);
        if let Evidence::Numeric { fitted_exponent, .. } = v.evidence {
            assert!((fitted_exponent - 2.0).abs() < 1e-3);
        } else {
            panic!()
        }
    }

    #[test]
    fn zeta_two_with_hint_is_exact() {
        let v = series_verdict(|n| Ok((n as f64).powi(-2)), Some(2.0)).unwrap();
        assert!((v.value - PI * PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_diverges() {
        let v = series_verdict(|n| Ok(1.0 / n as f64), Some(1.0)).unwrap();
        assert_eq!(v.verdict, Verdict::Diverges);
        assert!(v.value.is_infinite());
        let v = series_verdict(|n| Ok(1.0 / n as f64), None).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
        let v = series_verdict(|n| Ok((n as f64).powf(-0.5)), None).unwrap();
        assert_eq!(v.verdict, Verdict::Diverges);
    }

    #[test]
    fn inside_margin_is_inconclusive() {
        let v = series_verdict(|n| Ok((n as f64).powf(-1.02)), None).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn negative_term_is_contract_violation() {
        let r = series_verdict(|n| Ok(if n == 7 { -1.0 } else { 0.0 }), None);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn geometric_and_zero() {
        let v = series_verdict(|n| Ok(0.5f64.powi(n as i32)), Some(f64::INFINITY)).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15);
        let z = series_verdict(|_| Ok(0.0), None).unwrap();
        assert_eq!(z.verdict, Verdict::Converges);
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn evaluation_failure_is_inconclusive() {
        let v = series_verdict(|n| if n > 10 { Err(Error::Domain("x".into())) } else { Ok(1.0) }, None).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }
}
