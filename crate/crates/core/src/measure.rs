//! Symmetric Lévy measures: the α-stable family and tabulated custom measures.
//!
//! All one-sided quantities refer to the positive half-line; the measures
//! are symmetric so `ν((-∞, -u]) = ν([u, ∞))`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{self, Tolerance};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(domain(format!("stability index {alpha} outside (0, 2)")))
    }
}

/// `I_α = 2 ∫_0^∞ (1 - cos u) u^{-1-α} du`, split at `u = 1`.
///
/// On `[0, 1]` the Taylor series of `1 - cos u` integrates term by term.
/// On `[1, ∞)` the non-oscillating part is `1/α`; the cosine part is
/// integrated half-period by half-period and the remainder beyond the last
/// zero is summed from its asymptotic expansion.
pub fn stable_integral_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;

    // ∫_0^1 (1 - cos u) u^{-1-α} du = Σ_k (-1)^{k+1} / ((2k)! (2k - α))
    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 1..40 {
        let k2 = 2.0 * k as f64;
        fact *= (k2 - 1.0) * k2;
        let term = 1.0 / (fact * (k2 - alpha));
        head += if k % 2 == 1 { term } else { -term };
        if term < 1e-20 {
            break;
        }
    }

    let beta = 1.0 + alpha;
    let tol = Tolerance::new(1e-17, 1e-14);
    let g = |u: f64| u.cos() * u.powf(-beta);
    let mut cos_part = quad::integrate(g, 1.0, 0.5 * PI, tol)?.value;
    const HALF_PERIODS: usize = 200;
    for k in 1..=HALF_PERIODS {
        let lo = (k as f64 - 0.5) * PI;
        cos_part += quad::integrate(g, lo, lo + PI, tol)?.value;
    }
    let a = (HALF_PERIODS as f64 + 0.5) * PI;
    cos_part += cos_tail_asymptotic(a, beta);

    Ok(2.0 * (head + 1.0 / alpha - cos_part))
}

/// `∫_A^∞ cos(u) u^{-β} du` via `Re[i e^{iA} Σ_j (-i)^j (β)_j A^{-β-j}]`.
fn cos_tail_asymptotic(a: f64, beta: f64) -> f64 {
    // running coefficient c_j = i e^{iA} (-i)^j (β)_j A^{-β-j}
    let (s, c) = a.sin_cos();
    let mut re = -s * a.powf(-beta);
    let mut im = c * a.powf(-beta);
    let mut sum = re;
    let mut prev = f64::INFINITY;
    for j in 0..60 {
        let scale = (beta + j as f64) / a;
        // multiply by -i
        let (nre, nim) = (im, -re);
        re = nre * scale;
        im = nim * scale;
        let mag = (re * re + im * im).sqrt();
        if mag > prev || mag < 1e-22 {
            break;
        }
        prev = mag;
        sum += re;
    }
    sum
}

fn constant_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Standardization constant `C_α = 1 / I_α`, making the symmetric measure
/// `C_α |y|^{-1-α} dy` the Lévy measure of a process with
/// `E exp(iθL_t) = exp(-t|θ|^α)`. Cached per α.
pub fn standardization_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let key = alpha.to_bits();
    if let Some(c) = constant_cache().read().ok().and_then(|m| m.get(&key).copied()) {
        return Ok(c);
    }
    let c = 1.0 / stable_integral_constant(alpha)?;
    if let Ok(mut m) = constant_cache().write() {
        m.insert(key, c);
    }
    Ok(c)
}

/// Symmetric α-stable Lévy measure `C_α |y|^{-1-α} dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableMeasure {
    alpha: f64,
    c_alpha: f64,
}

impl StableMeasure {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            c_alpha: standardization_constant(alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }
}

/// Interpolation rule on one table segment.
#[derive(Debug, Clone, Copy)]
enum Segment {
    /// `T(y) = T_i (y/u_i)^{-k}`
    Power { k: f64 },
    Linear,
}

/// Custom symmetric measure given by a table of `(u, ν([u,∞)), ∫_{|y|≤u} y² ν(dy))`.
///
/// Values between nodes come from log-log interpolation (piecewise power
/// laws), falling back to linear interpolation on segments touching zero.
/// Both rules preserve monotonicity. Queries outside the table are errors,
/// except above the last node when the tail has already reached zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedMeasure {
    u: Vec<f64>,
    tail: Vec<f64>,
    trunc_m2: Vec<f64>,
}

impl TabulatedMeasure {
    pub fn new(u: Vec<f64>, tail: Vec<f64>, trunc_m2: Vec<f64>) -> Result<Self> {
        if u.len() < 2 || u.len() != tail.len() || u.len() != trunc_m2.len() {
            return Err(domain("table needs at least two rows with three columns each"));
        }
        if u[0] <= 0.0 {
            return Err(domain("table abscissae must be positive"));
        }
        for i in 1..u.len() {
            if !(u[i] > u[i - 1]) {
                return Err(domain(format!("u must be strictly increasing (row {})", i + 1)));
            }
            if tail[i] > tail[i - 1] {
                return Err(domain(format!("tail must be nonincreasing (row {})", i + 1)));
            }
            if trunc_m2[i] < trunc_m2[i - 1] {
                return Err(domain(format!("truncated second moment must be nondecreasing (row {})", i + 1)));
            }
        }
        if tail.iter().chain(trunc_m2.iter()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("table values must be finite and nonnegative"));
        }
        Ok(Self { u, tail, trunc_m2 })
    }

    /// Parse the whitespace- or comma-separated text format: a header row
    /// naming `u tail trunc_m2`, then one row per node. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header_seen = false;
        let (mut u, mut tail, mut m2) = (Vec::new(), Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if !header_seen {
                if cols != ["u", "tail", "trunc_m2"] {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected header `u tail trunc_m2`, found `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            if cols.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 3 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("`{s}`: {e}"),
                })
            };
            u.push(parse(cols[0])?);
            tail.push(parse(cols[1])?);
            m2.push(parse(cols[2])?);
        }
        if !header_seen {
            return Err(Error::Parse { line: 1, msg: "empty table".into() });
        }
        Self::new(u, tail, m2)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("u tail trunc_m2\n");
        for i in 0..self.u.len() {
            s.push_str(&format!("{:e} {:e} {:e}\n", self.u[i], self.tail[i], self.trunc_m2[i]));
        }
        s
    }

    /// Tabulate a stable measure on a log grid; log-log interpolation of a
    /// power law is exact, so this is a faithful custom copy.
    pub fn from_stable(stable: &StableMeasure, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        let m = LevyMeasure::Stable(*stable);
        let ratio = (hi / lo).ln() / (nodes - 1) as f64;
        let u: Vec<f64> = (0..nodes).map(|i| lo * (ratio * i as f64).exp()).collect();
        let tail = u.iter().map(|&x| m.tail_mass(x)).collect::<Result<_>>()?;
        let m2 = u.iter().map(|&x| m.truncated_second_moment(x)).collect::<Result<_>>()?;
        Self::new(u, tail, m2)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.u[0], *self.u.last().unwrap())
    }

    fn out_of_range(&self, value: f64) -> Error {
        let (lo, hi) = self.range();
        Error::Extrapolation { value, lo, hi }
    }

    /// Segment index `i` with `u[i] <= x <= u[i+1]`.
    fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            return None;
        }
        let i = self.u.partition_point(|&v| v <= x);
        Some(i.saturating_sub(1).min(self.u.len() - 2))
    }

    fn segment(values: &[f64], u: &[f64], i: usize) -> Segment {
        let (a, b) = (values[i], values[i + 1]);
        if a > 0.0 && b > 0.0 {
            Segment::Power {
                k: -(b / a).ln() / (u[i + 1] / u[i]).ln(),
            }
        } else {
            Segment::Linear
        }
    }

    fn interpolate(values: &[f64], u: &[f64], i: usize, x: f64) -> f64 {
        match Self::segment(values, u, i) {
            Segment::Power { k } => values[i] * (x / u[i]).powf(-k),
            Segment::Linear => {
                let w = (x - u[i]) / (u[i + 1] - u[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    fn last_tail_is_zero(&self) -> bool {
        *self.tail.last().unwrap() == 0.0
    }

    pub fn tail(&self, x: f64) -> Result<f64> {
        match self.locate(x) {
            Some(i) => Ok(Self::interpolate(&self.tail, &self.u, i, x)),
            None if x > self.range().1 && self.last_tail_is_zero() => Ok(0.0),
            None => Err(self.out_of_range(x)),
        }
    }

    pub fn trunc_m2(&self, x: f64) -> Result<f64> {
        match self.locate(x) {
            Some(i) => Ok(Self::interpolate(&self.trunc_m2, &self.u, i, x)),
            None if x > self.range().1 && self.last_tail_is_zero() => Ok(*self.trunc_m2.last().unwrap()),
            None => Err(self.out_of_range(x)),
        }
    }

    /// One-sided density `-dT/dy` implied by the interpolated tail.
    pub fn density(&self, x: f64) -> Result<f64> {
        match self.locate(x) {
            Some(i) => Ok(match Self::segment(&self.tail, &self.u, i) {
                Segment::Power { k } => k * Self::interpolate(&self.tail, &self.u, i, x) / x,
                Segment::Linear => (self.tail[i] - self.tail[i + 1]) / (self.u[i + 1] - self.u[i]),
            }),
            None if x > self.range().1 && self.last_tail_is_zero() => Ok(0.0),
            None => Err(self.out_of_range(x)),
        }
    }

    /// Point `y` with `T(y) = target`, for `0 < target <= T(u_0)`.
    fn invert_tail(&self, target: f64) -> Result<f64> {
        let n = self.u.len();
        // tail is nonincreasing: first node with T(u_j) < target
        let j = self.tail.partition_point(|&t| t >= target);
        if j == 0 {
            return Ok(self.u[0]);
        }
        if j == n {
            return if self.tail[n - 1] == target {
                Ok(self.u[n - 1])
            } else {
                Err(Error::Extrapolation {
                    value: f64::INFINITY,
                    lo: self.u[0],
                    hi: self.u[n - 1],
                })
            };
        }
        let i = j - 1;
        Ok(match Self::segment(&self.tail, &self.u, i) {
            Segment::Power { k } => self.u[i] * (self.tail[i] / target).powf(1.0 / k),
            Segment::Linear => {
                let w = (self.tail[i] - target) / (self.tail[i] - self.tail[i + 1]);
                self.u[i] + w * (self.u[i + 1] - self.u[i])
            }
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.u
    }
}

/// A symmetric Lévy measure without atom at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyMeasure {
    Stable(StableMeasure),
    Custom(Arc<TabulatedMeasure>),
}

impl fmt::Display for LevyMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevyMeasure::Stable(s) => write!(f, "Stable({})", s.alpha),
            LevyMeasure::Custom(t) => {
                let (lo, hi) = t.range();
                write!(f, "Custom[{} nodes on {lo:e}..{hi:e}]", t.u.len())
            }
        }
    }
}

fn check_positive(u: f64) -> Result<()> {
    if u > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("argument {u} must be positive")))
    }
}

impl LevyMeasure {
    pub fn stable(alpha: f64) -> Result<Self> {
        Ok(Self::Stable(StableMeasure::new(alpha)?))
    }

    pub fn custom(table: TabulatedMeasure) -> Self {
        Self::Custom(Arc::new(table))
    }

    /// Stability index for the stable family.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            LevyMeasure::Stable(s) => Some(s.alpha),
            LevyMeasure::Custom(_) => None,
        }
    }

    /// `ν([u, ∞))`.
    pub fn tail_mass(&self, u: f64) -> Result<f64> {
        check_positive(u)?;
        match self {
            LevyMeasure::Stable(s) => Ok(s.c_alpha * u.powf(-s.alpha) / s.alpha),
            LevyMeasure::Custom(t) => t.tail(u),
        }
    }

    /// `∫_{|y|≤u} y² ν(dy)`.
    pub fn truncated_second_moment(&self, u: f64) -> Result<f64> {
        check_positive(u)?;
        match self {
            LevyMeasure::Stable(s) => Ok(2.0 * s.c_alpha * u.powf(2.0 - s.alpha) / (2.0 - s.alpha)),
            LevyMeasure::Custom(t) => t.trunc_m2(u),
        }
    }

    /// `∫_{|y|≤u} |y|³ ν(dy)` for the stable family.
    pub fn truncated_third_moment(&self, u: f64) -> Result<f64> {
        check_positive(u)?;
        match self {
            LevyMeasure::Stable(s) => Ok(2.0 * s.c_alpha * u.powf(3.0 - s.alpha) / (3.0 - s.alpha)),
            LevyMeasure::Custom(_) => Err(domain("third moment is only available for the stable family")),
        }
    }

    /// One-sided density at `y > 0`.
    pub fn density(&self, y: f64) -> Result<f64> {
        check_positive(y)?;
        match self {
            LevyMeasure::Stable(s) => Ok(s.c_alpha * y.powf(-1.0 - s.alpha)),
            LevyMeasure::Custom(t) => t.density(y),
        }
    }

    /// Inverse-transform draw from the normalized tail above `delta`:
    /// returns `y >= delta` with `ν([y,∞)) / ν([δ,∞)) = 1 - p`.
    pub fn sample_magnitude(&self, delta: f64, p: f64) -> Result<f64> {
        check_positive(delta)?;
        if !(0.0..1.0).contains(&p) {
            return Err(domain(format!("probability {p} outside [0, 1)")));
        }
        match self {
            LevyMeasure::Stable(s) => Ok(delta * (1.0 - p).powf(-1.0 / s.alpha)),
            LevyMeasure::Custom(t) => {
                let top = t.tail(delta)?;
                if top <= 0.0 {
                    return Err(Error::NoMass(delta));
                }
                if p == 0.0 {
                    return Ok(delta);
                }
                Ok(t.invert_tail((1.0 - p) * top)?.max(delta))
            }
        }
    }

    /// Fast path for the stable family used inside hot loops.
    #[inline]
    pub(crate) fn sampler(&self, delta: f64) -> Result<MagnitudeSampler<'_>> {
        check_positive(delta)?;
        match self {
            LevyMeasure::Stable(s) => Ok(MagnitudeSampler::Pareto {
                delta,
                inv_alpha: -1.0 / s.alpha,
            }),
            LevyMeasure::Custom(_) => {
                if self.tail_mass(delta)? <= 0.0 {
                    return Err(Error::NoMass(delta));
                }
                Ok(MagnitudeSampler::Generic { measure: self, delta })
            }
        }
    }
}

pub(crate) enum MagnitudeSampler<'a> {
    Pareto { delta: f64, inv_alpha: f64 },
    Generic { measure: &'a LevyMeasure, delta: f64 },
}

impl MagnitudeSampler<'_> {
    /// Draw given `q = 1 - p` uniform on (0, 1].
    #[inline]
    pub fn draw(&self, q: f64) -> Result<f64> {
        match *self {
            MagnitudeSampler::Pareto { delta, inv_alpha } => Ok(delta * q.powf(inv_alpha)),
            MagnitudeSampler::Generic { measure, delta } => measure.sample_magnitude(delta, 1.0 - q),
        }
    }
}

/// Serializable description of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    Stable { alpha: f64 },
    Custom(TabulatedMeasure),
}

impl TryFrom<MeasureSpec> for LevyMeasure {
    type Error = Error;

    fn try_from(spec: MeasureSpec) -> Result<Self> {
        match spec {
            MeasureSpec::Stable { alpha } => LevyMeasure::stable(alpha),
            MeasureSpec::Custom(t) => Ok(LevyMeasure::custom(t)),
        }
    }
}

impl From<&LevyMeasure> for MeasureSpec {
    fn from(m: &LevyMeasure) -> Self {
        match m {
            LevyMeasure::Stable(s) => MeasureSpec::Stable { alpha: s.alpha },
            LevyMeasure::Custom(t) => MeasureSpec::Custom((**t).clone()),
        }
    }
}

impl Serialize for LevyMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevyMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = MeasureSpec::deserialize(d)?;
        LevyMeasure::try_from(spec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cauchy_constant() {
        let c = standardization_constant(1.0).unwrap();
        assert_relative_eq!(c, 1.0 / PI, max_relative = 1e-10);
    }

    #[test]
    fn alpha_outside_range_is_domain_error() {
        for a in [0.0, 2.0, -1.0, 2.5, f64::NAN] {
            assert!(matches!(standardization_constant(a), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn near_gaussian_constant_is_positive_and_finite() {
        let c = standardization_constant(1.99).unwrap();
        assert!(c > 0.0 && c.is_finite());
    }

    #[test]
    fn tail_examples() {
        let m = LevyMeasure::stable(1.0).unwrap();
        assert_relative_eq!(m.tail_mass(2.0).unwrap(), 0.5 / PI, max_relative = 1e-10);
        assert!(m.tail_mass(1e12).unwrap() < 1e-12);
        assert!(matches!(m.tail_mass(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.tail_mass(-1.0), Err(Error::Domain(_))));
        let half = LevyMeasure::stable(0.5).unwrap();
        assert_relative_eq!(
            half.tail_mass(1.0).unwrap(),
            2.0 * standardization_constant(0.5).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn truncated_moment_examples() {
        let m = LevyMeasure::stable(1.0).unwrap();
        assert_relative_eq!(m.truncated_second_moment(1.0).unwrap(), 2.0 / PI, max_relative = 1e-10);
        assert!(m.truncated_second_moment(1e-12).unwrap() < 1e-11);
        assert!(matches!(m.truncated_second_moment(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn magnitude_examples() {
        let m = LevyMeasure::stable(0.5).unwrap();
        assert_relative_eq!(m.sample_magnitude(0.1, 0.75).unwrap(), 1.6, max_relative = 1e-12);
        assert_eq!(m.sample_magnitude(0.1, 0.0).unwrap(), 0.1);
        let c = LevyMeasure::stable(1.0).unwrap();
        assert_relative_eq!(c.sample_magnitude(1.0, 0.5).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_stable_copy_matches_closed_form() {
        let s = StableMeasure::new(1.3).unwrap();
        let t = TabulatedMeasure::from_stable(&s, 1e-3, 1e3, 25).unwrap();
        let m = LevyMeasure::Stable(s);
        let c = LevyMeasure::custom(t);
        for &u in &[1.7e-3, 0.05, 1.0, 33.0, 999.0] {
            assert_relative_eq!(c.tail_mass(u).unwrap(), m.tail_mass(u).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(
                c.truncated_second_moment(u).unwrap(),
                m.truncated_second_moment(u).unwrap(),
                max_relative = 1e-12
            );
            assert_relative_eq!(c.density(u).unwrap(), m.density(u).unwrap(), max_relative = 1e-10);
        }
        for &p in &[0.0, 0.3, 0.9, 0.999] {
            let y = c.sample_magnitude(0.01, p).unwrap();
            assert_relative_eq!(y, m.sample_magnitude(0.01, p).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn table_refuses_extrapolation() {
        let t = TabulatedMeasure::new(vec![0.1, 1.0, 10.0], vec![5.0, 1.0, 0.2], vec![0.01, 0.5, 2.0]).unwrap();
        let m = LevyMeasure::custom(t);
        assert!(matches!(m.tail_mass(0.05), Err(Error::Extrapolation { .. })));
        assert!(matches!(m.tail_mass(20.0), Err(Error::Extrapolation { .. })));
        // quantile beyond the last node
        assert!(matches!(m.sample_magnitude(0.1, 0.99), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn bounded_support_table() {
        let t = TabulatedMeasure::new(vec![0.5, 1.0, 2.0], vec![3.0, 1.0, 0.0], vec![0.2, 1.0, 2.5]).unwrap();
        let m = LevyMeasure::custom(t);
        assert_eq!(m.tail_mass(5.0).unwrap(), 0.0);
        assert_eq!(m.truncated_second_moment(5.0).unwrap(), 2.5);
        let y = m.sample_magnitude(0.5, 0.999_999).unwrap();
        assert!((1.0..=2.0).contains(&y));
        assert!(matches!(m.sample_magnitude(2.0, 0.5), Err(Error::NoMass(_))));
    }

    #[test]
    fn table_validation_and_parsing() {
        assert!(TabulatedMeasure::new(vec![1.0, 1.0], vec![1.0, 0.5], vec![0.0, 0.1]).is_err());
        assert!(TabulatedMeasure::new(vec![1.0, 2.0], vec![1.0, 1.5], vec![0.0, 0.1]).is_err());
        let text = "# custom\nu, tail, trunc_m2\n0.1 2.0 0.01\n1.0 0.5 0.2 # node\n10 0.01 0.9\n";
        let t = TabulatedMeasure::parse(text).unwrap();
        assert_eq!(t.nodes(), &[0.1, 1.0, 10.0]);
        let again = TabulatedMeasure::parse(&t.to_text()).unwrap();
        assert_eq!(t, again);
        match TabulatedMeasure::parse("u tail\n1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match TabulatedMeasure::parse("u tail trunc_m2\n1 2 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn measure_serde_round_trip() {
        let m = LevyMeasure::stable(1.5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: LevyMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
