//! Symmetric α-stable random measures on an interval or a finite set, and
//! integrals `X_t = ∫ f(t, x) M(dx)` of monotone-decomposable kernels by
//! Poisson series.
//!
//! A path is built from two disjoint pieces of the Poisson point field:
//! the a.s. finite set of points with `y·V(x) > 1`, where
//! `V(x) = f1(a, x) + f2(a, x)`, drawn over the whole space, and the points
//! with `y >= δ` and `y·V(x) <= 1` on the chosen subdomain. The second
//! moment of what the second piece leaves out is [`truncation_bound`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::measure::standardization_constant;
use crate::par::{try_map_indexed, Execution};
use crate::quad::{integrate, integrate_pieces, Tolerance};
use crate::rng::{open_unit, poisson, rademacher, RngStream};
use crate::stats::{interquartile_range, mean, rank_transform, std_err, two_sample_ks, dcor_permutation_test, EcfPoint};
use crate::verify::{
    chambers_mallows_stuck, marginal_residual, MarginalMode, PlotData, Provenance, VerificationReport, BAND_SE,
    MARGINAL_TOLERANCE, SIGNIFICANCE, SUP_GRID_POINTS,
};

pub type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const QUAD_PIECES: usize = 64;
const LOCATION_CELLS: usize = 4096;
const GAUSS_CELLS: usize = 1024;
const LARGE_TAG: u64 = 0x4C41_5247;
const SMALL_TAG: u64 = 0x534D_414C;
const GAUSS_TAG: u64 = 0x4741_5553;
const ORACLE_TAG: u64 = 0x4F52_4143;
const PERM_TAG: u64 = 0x5045_524D;

/// Underlying space `(E, m)`.
#[derive(Clone)]
pub enum Domain {
    /// `[lo, hi]` with `m(dx) = w(x) dx`; `None` is Lebesgue measure.
    Interval { lo: f64, hi: f64, density: Option<Density> },
    /// Atoms `x_j` with masses `m_j`.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { lo, hi, density } => f
                .debug_struct("Interval")
                .field("lo", lo)
                .field("hi", hi)
                .field("density", &density.as_ref().map_or("lebesgue", |_| "custom"))
                .finish(),
            Domain::Discrete { points, weights } => {
                f.debug_struct("Discrete").field("points", points).field("weights", weights).finish()
            }
        }
    }
}

/// Closed piece `[lo, hi]` of the space: an element of the exhaustion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Subdomain {
    pub lo: f64,
    pub hi: f64,
}

impl Subdomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(domain(format!("subdomain [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Threshold `δ_n = 2^{-n}` of the `n`-th exhaustion step.
pub fn exhaustion_delta(n: u32) -> f64 {
    0.5f64.powi(n as i32)
}

/// Control space of a symmetric α-stable random measure with Lévy density
/// `c_α|z|^{-1-α}` in the jump variable.
#[derive(Debug, Clone)]
pub struct StableMeasureSpace {
    domain: Domain,
    alpha: f64,
    c_alpha: f64,
}

impl StableMeasureSpace {
    pub fn interval(lo: f64, hi: f64, alpha: f64) -> Result<Self> {
        Self::new(Domain::Interval { lo, hi, density: None }, alpha)
    }

    pub fn interval_with_density<F>(lo: f64, hi: f64, density: F, alpha: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(Domain::Interval { lo, hi, density: Some(Arc::new(density)) }, alpha)
    }

    pub fn discrete(points: Vec<f64>, weights: Vec<f64>, alpha: f64) -> Result<Self> {
        Self::new(Domain::Discrete { points, weights }, alpha)
    }

    pub fn new(domain: Domain, alpha: f64) -> Result<Self> {
        match &domain {
            Domain::Interval { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(domain_err(format!("interval [{lo}, {hi}] must be finite and nonempty")));
                }
            }
            Domain::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(domain_err("discrete space needs one weight per point"));
                }
                if points.iter().any(|x| !x.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(domain_err("points must be finite and weights finite and nonnegative"));
                }
            }
        }
        let c_alpha = standardization_constant(alpha)?;
        let space = Self { domain, alpha, c_alpha };
        space.mass(&space.whole())?;
        Ok(space)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn whole(&self) -> Subdomain {
        match &self.domain {
            Domain::Interval { lo, hi, .. } => Subdomain { lo: *lo, hi: *hi },
            Domain::Discrete { points, .. } => Subdomain {
                lo: points.iter().cloned().fold(f64::INFINITY, f64::min),
                hi: points.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
        }
    }

    fn density_at(&self, x: f64) -> f64 {
        match &self.domain {
            Domain::Interval { density: Some(w), .. } => w(x),
            _ => 1.0,
        }
    }

    /// `∫_sub g dm`; a non-finite or negative result is an assumption violation.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, sub: &Subdomain) -> Result<f64> {
        let v = match &self.domain {
            Domain::Interval { lo, hi, .. } => {
                let (a, b) = (lo.max(sub.lo), hi.min(sub.hi));
                if !(a < b) {
                    return Ok(0.0);
                }
                let breaks: Vec<f64> = (0..=QUAD_PIECES).map(|i| a + (b - a) * i as f64 / QUAD_PIECES as f64).collect();
                integrate_pieces(|x| g(x) * self.density_at(x), &breaks, Tolerance::default())?.value
            }
            Domain::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(x, _)| sub.contains(**x))
                .map(|(x, w)| if *w > 0.0 { w * g(*x) } else { 0.0 })
                .sum(),
        };
        if !v.is_finite() {
            return Err(Error::Assumption(format!("integral over [{}, {}] is not finite", sub.lo, sub.hi)));
        }
        if v < 0.0 {
            return Err(Error::Assumption("negative mass: the density must be nonnegative".into()));
        }
        Ok(v)
    }

    pub fn mass(&self, sub: &Subdomain) -> Result<f64> {
        self.integrate(|_| 1.0, sub)
    }

    /// `2c_α·δ^{-α}/α`: mass of `{|z| >= δ}` under the jump density.
    pub fn jump_tail(&self, delta: f64) -> f64 {
        2.0 * self.c_alpha * delta.powf(-self.alpha) / self.alpha
    }
}

fn domain_err(msg: impl Into<String>) -> Error {
    domain(msg)
}

/// Inverse-CDF sampler for a finite measure `g dm` restricted to a subdomain.
#[derive(Debug, Clone)]
enum Locator {
    Uniform { lo: f64, hi: f64 },
    /// Piecewise-linear CDF on equal cells.
    Cells { nodes: Vec<f64>, cum: Vec<f64> },
    Atoms { points: Vec<f64>, cum: Vec<f64> },
}

#[derive(Debug, Clone)]
struct LocationSampler {
    locator: Locator,
    total: f64,
}

impl LocationSampler {
    fn build(space: &StableMeasureSpace, sub: &Subdomain, g: Option<&dyn Fn(f64) -> f64>) -> Result<Self> {
        let weight = |x: f64| g.map_or(1.0, |g| g(x));
        match &space.domain {
            Domain::Interval { lo, hi, density } => {
                let (a, b) = (lo.max(sub.lo), hi.min(sub.hi));
                if !(a < b) {
                    return Ok(Self { locator: Locator::Uniform { lo: a, hi: a }, total: 0.0 });
                }
                if density.is_none() && g.is_none() {
                    return Ok(Self { locator: Locator::Uniform { lo: a, hi: b }, total: b - a });
                }
                let nodes: Vec<f64> = (0..=LOCATION_CELLS).map(|i| a + (b - a) * i as f64 / LOCATION_CELLS as f64).collect();
                let mut cum = Vec::with_capacity(nodes.len());
                cum.push(0.0);
                let mut acc = 0.0;
                for w in nodes.windows(2) {
                    let m = integrate(|x| weight(x) * space.density_at(x), w[0], w[1], Tolerance::default())?.value;
                    if !(m.is_finite() && m >= 0.0) {
                        return Err(Error::Assumption(format!("location weight on [{}, {}] is {m}", w[0], w[1])));
                    }
                    acc += m;
                    cum.push(acc);
                }
                Ok(Self { locator: Locator::Cells { nodes, cum }, total: acc })
            }
            Domain::Discrete { points, weights } => {
                let mut pts = Vec::new();
                let mut cum = vec![0.0];
                let mut acc = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    if !sub.contains(*x) || *w == 0.0 {
                        continue;
                    }
                    let m = w * weight(*x);
                    if !(m.is_finite() && m >= 0.0) {
                        return Err(Error::Assumption(format!("location weight at {x} is {m}")));
                    }
                    acc += m;
                    pts.push(*x);
                    cum.push(acc);
                }
                Ok(Self { locator: Locator::Atoms { points: pts, cum }, total: acc })
            }
        }
    }

    fn draw(&self, q: f64) -> f64 {
        match &self.locator {
            Locator::Uniform { lo, hi } => lo + q * (hi - lo),
            Locator::Cells { nodes, cum } => {
                let target = q * self.total;
                let i = cum.partition_point(|&c| c <= target).clamp(1, nodes.len() - 1) - 1;
                let width = cum[i + 1] - cum[i];
                let frac = if width > 0.0 { ((target - cum[i]) / width).clamp(0.0, 1.0) } else { 0.0 };
                nodes[i] + frac * (nodes[i + 1] - nodes[i])
            }
            Locator::Atoms { points, cum } => {
                let target = q * self.total;
                let i = cum.partition_point(|&c| c <= target).clamp(1, points.len()) - 1;
                points[i]
            }
        }
    }
}

/// Atom `(±y, x)` of the Poisson point field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurePoint {
    pub magnitude: f64,
    pub sign: i8,
    pub location: f64,
}

impl MeasurePoint {
    pub fn signed(&self) -> f64 {
        f64::from(self.sign) * self.magnitude
    }
}

fn draw_points(sampler: &LocationSampler, mean: f64, delta: f64, alpha: f64, stream: RngStream) -> Vec<MeasurePoint> {
    let mut rng = stream.rng();
    let count = poisson(&mut rng, mean);
    (0..count)
        .map(|_| {
            let magnitude = delta * open_unit(&mut rng).powf(-1.0 / alpha);
            let sign = rademacher(&mut rng);
            let location = sampler.draw(open_unit(&mut rng));
            MeasurePoint { magnitude, sign, location }
        })
        .collect()
}

/// Points with `y >= δ` and location in `sub`.
pub fn sample_measure_points(space: &StableMeasureSpace, delta: f64, sub: &Subdomain, stream: RngStream) -> Result<Vec<MeasurePoint>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("delta must be positive and finite"));
    }
    let sampler = LocationSampler::build(space, sub, None).map_err(|e| contract(format!("subdomain mass: {e}")))?;
    Ok(draw_points(&sampler, sampler.total * space.jump_tail(delta), delta, space.alpha, stream))
}

/// Integrand `f = f1 - f2` with `f1`, `f2` nonnegative and nondecreasing in `t`.
#[derive(Clone)]
pub struct KernelSpec {
    pub name: String,
    f1: KernelFn,
    f2: Option<KernelFn>,
    horizon: f64,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("decomposed", &self.f2.is_some())
            .finish()
    }
}

impl KernelSpec {
    /// Kernel with `f2 = 0`.
    pub fn new<F>(name: &str, f1: F, horizon: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(name, Arc::new(f1), None, horizon)
    }

    pub fn with_decomposition<F, G>(name: &str, f1: F, f2: G, horizon: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(name, Arc::new(f1), Some(Arc::new(f2)), horizon)
    }

    fn build(name: &str, f1: KernelFn, f2: Option<KernelFn>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(domain("kernel horizon must be positive and finite"));
        }
        Ok(Self { name: name.into(), f1, f2, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn f1(&self, t: f64, x: f64) -> f64 {
        (self.f1)(t, x)
    }

    pub fn f2(&self, t: f64, x: f64) -> f64 {
        self.f2.as_ref().map_or(0.0, |f| f(t, x))
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.f1(t, x) - self.f2(t, x)
    }

    /// `V(x) = f1(a, x) + f2(a, x)`, which dominates `|f(t, x)|` on `[0, a]`.
    pub fn variation(&self, x: f64) -> f64 {
        self.f1(self.horizon, x) + self.f2(self.horizon, x)
    }

    /// The kernels `f1` and `f2` on their own.
    pub fn parts(&self) -> (KernelSpec, KernelSpec) {
        let zero: KernelFn = Arc::new(|_, _| 0.0);
        let first = Self { name: format!("{}.f1", self.name), f1: self.f1.clone(), f2: None, horizon: self.horizon };
        let second = Self {
            name: format!("{}.f2", self.name),
            f1: self.f2.clone().unwrap_or(zero),
            f2: None,
            horizon: self.horizon,
        };
        (first, second)
    }

    /// `k·f` for `k >= 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(domain("kernel scale must be nonnegative"));
        }
        let f1 = self.f1.clone();
        let f2 = self.f2.clone();
        Self::build(
            &format!("{}*{k}", self.name),
            Arc::new(move |t, x| k * f1(t, x)),
            f2.map(|f| Arc::new(move |t: f64, x: f64| k * f(t, x)) as KernelFn),
            self.horizon,
        )
    }
}

pub type KernelBuilder = Arc<dyn Fn(&BTreeMap<String, f64>, f64) -> Result<KernelSpec> + Send + Sync>;

/// Kernels by name. Builders receive named parameters and the horizon.
#[derive(Clone, Default)]
pub struct KernelRegistry {
    builders: BTreeMap<String, KernelBuilder>,
}

fn take_params(name: &str, params: &BTreeMap<String, f64>, allowed: &[(&str, f64)]) -> Result<Vec<f64>> {
    if let Some(k) = params.keys().find(|k| !allowed.iter().any(|(a, _)| a == k)) {
        return Err(Error::Config(format!("kernel {name} has no parameter {k}")));
    }
    Ok(allowed.iter().map(|(k, d)| params.get(*k).copied().unwrap_or(*d)).collect())
}

impl KernelRegistry {
    /// `indicator` (`scale·1{x <= t}`), `linear` (`scale·t·x`),
    /// `ou` (`1{x <= t}·e^{-λ(t-x)}`) and `zero`.
    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register("indicator", |p, a| {
            let s = take_params("indicator", p, &[("scale", 1.0)])?[0];
            KernelSpec::new("indicator", move |t, x| if x <= t { s } else { 0.0 }, a)
        });
        r.register("linear", |p, a| {
            let s = take_params("linear", p, &[("scale", 1.0)])?[0];
            KernelSpec::new("linear", move |t, x| s * t * x, a)
        });
        r.register("ou", |p, a| {
            let l = take_params("ou", p, &[("lambda", 1.0)])?[0];
            if !(l >= 0.0) {
                return Err(Error::Config("ou kernel needs lambda >= 0".into()));
            }
            KernelSpec::with_decomposition(
                "ou",
                |t, x| if x <= t { 1.0 } else { 0.0 },
                move |t, x| if x <= t { -(-l * (t - x)).exp_m1() } else { 0.0 },
                a,
            )
        });
        r.register("zero", |p, a| {
            take_params("zero", p, &[])?;
            KernelSpec::new("zero", |_, _| 0.0, a)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&BTreeMap<String, f64>, f64) -> Result<KernelSpec> + Send + Sync + 'static,
    {
        self.builders.insert(name.into(), Arc::new(builder));
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(|s| s.as_str()).collect()
    }

    pub fn build(&self, name: &str, params: &BTreeMap<String, f64>, horizon: f64) -> Result<KernelSpec> {
        let b = self
            .builders
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown kernel {name}; known: {}", self.names().join(", "))))?;
        b(params, horizon)
    }
}

/// A pair of grid times at which one part of the kernel decreases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityWitness {
    pub part: u8,
    pub t: f64,
    pub t_prime: f64,
    pub x: f64,
}

impl fmt::Display for MonotonicityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{} decreases from t = {} to t' = {} at x = {}", self.part, self.t, self.t_prime, self.x)
    }
}

/// First grid pair `t < t'` with `f_i(t', x) < f_i(t, x)`, compared exactly.
pub fn monotonicity_witness(kernel: &KernelSpec, t_grid: &[f64], x_grid: &[f64]) -> Option<MonotonicityWitness> {
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    for &x in x_grid {
        for w in ts.windows(2) {
            for part in [1u8, 2] {
                let f = |t| if part == 1 { kernel.f1(t, x) } else { kernel.f2(t, x) };
                if f(w[1]) < f(w[0]) {
                    return Some(MonotonicityWitness { part, t: w[0], t_prime: w[1], x });
                }
            }
        }
    }
    None
}

pub fn default_t_grid(horizon: f64) -> Vec<f64> {
    (0..=32).map(|i| horizon * i as f64 / 32.0).collect()
}

pub fn default_x_grid(space: &StableMeasureSpace) -> Vec<f64> {
    match space.domain() {
        Domain::Interval { lo, hi, .. } => (0..=64).map(|i| lo + (hi - lo) * i as f64 / 64.0).collect(),
        Domain::Discrete { points, .. } => points.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub name: String,
    pub horizon: f64,
    pub t_points: usize,
    pub x_points: usize,
    /// `∫ f1(a, x)^α m(dx)`.
    pub f1_alpha_integral: f64,
    /// `∫ f2(a, x)^α m(dx)`.
    pub f2_alpha_integral: f64,
    /// `∫ V(x)^α m(dx)`.
    pub variation_alpha_integral: f64,
    /// `L^α(m)` norm of `V`.
    pub variation_norm: f64,
    /// Expected number of points with `y·V(x) > 1`.
    pub large_point_rate: f64,
}

/// Kernel that passed [`validate_kernel`] against a space. Every sampling
/// operation takes this type, so an unchecked kernel never reaches them.
#[derive(Debug, Clone)]
pub struct ValidatedKernel {
    kernel: KernelSpec,
    space: StableMeasureSpace,
    report: KernelReport,
    large: LocationSampler,
}

/// Checks monotonicity and nonnegativity on the grids and `∫ f_i(a, ·)^α dm < ∞`.
pub fn validate_kernel(kernel: &KernelSpec, space: &StableMeasureSpace, t_grid: &[f64], x_grid: &[f64]) -> Result<ValidatedKernel> {
    let a = kernel.horizon();
    if t_grid.iter().any(|t| !(0.0..=a).contains(t)) {
        return Err(domain(format!("validation times must lie in [0, {a}]")));
    }
    for &x in x_grid {
        for &t in t_grid {
            let (v1, v2) = (kernel.f1(t, x), kernel.f2(t, x));
            if !(v1 >= 0.0 && v2 >= 0.0 && v1.is_finite() && v2.is_finite()) {
                return Err(Error::Assumption(format!(
                    "kernel {} is negative or not finite at (t, x) = ({t}, {x})",
                    kernel.name
                )));
            }
        }
    }
    if let Some(w) = monotonicity_witness(kernel, t_grid, x_grid) {
        return Err(Error::Assumption(format!("kernel {} rejected: {w}", kernel.name)));
    }
    let alpha = space.alpha();
    let whole = space.whole();
    let i1 = space.integrate(|x| kernel.f1(a, x).powf(alpha), &whole)?;
    let i2 = space.integrate(|x| kernel.f2(a, x).powf(alpha), &whole)?;
    let iv = space.integrate(|x| kernel.variation(x).powf(alpha), &whole)?;
    let g = |x: f64| kernel.variation(x).powf(alpha);
    let large = LocationSampler::build(space, &whole, Some(&g))?;
    let report = KernelReport {
        name: kernel.name.clone(),
        horizon: a,
        t_points: t_grid.len(),
        x_points: x_grid.len(),
        f1_alpha_integral: i1,
        f2_alpha_integral: i2,
        variation_alpha_integral: iv,
        variation_norm: iv.powf(1.0 / alpha),
        large_point_rate: space.jump_tail(1.0) * iv,
    };
    Ok(ValidatedKernel { kernel: kernel.clone(), space: space.clone(), report, large })
}

impl ValidatedKernel {
    /// Validation on [`default_t_grid`] and [`default_x_grid`].
    pub fn new(kernel: &KernelSpec, space: &StableMeasureSpace) -> Result<Self> {
        validate_kernel(kernel, space, &default_t_grid(kernel.horizon()), &default_x_grid(space))
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn space(&self) -> &StableMeasureSpace {
        &self.space
    }

    pub fn report(&self) -> &KernelReport {
        &self.report
    }
}

/// Points with `y·V(x) > split`, over the whole space.
fn large_points(vk: &ValidatedKernel, split: f64, stream: RngStream) -> Vec<MeasurePoint> {
    let alpha = vk.space.alpha();
    let mut rng = stream.rng();
    let rate = vk.report.large_point_rate * split.powf(-alpha);
    let count = poisson(&mut rng, rate);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        // the cell CDF can put mass just past a jump of V; redraw there
        let (mut x, mut v) = (0.0, 0.0);
        for _ in 0..64 {
            x = vk.large.draw(open_unit(&mut rng));
            v = vk.kernel.variation(x);
            if v > 0.0 {
                break;
            }
        }
        let magnitude = if v > 0.0 { split / v * open_unit(&mut rng).powf(-1.0 / alpha) } else { 0.0 };
        let sign = rademacher(&mut rng);
        out.push(MeasurePoint { magnitude, sign, location: x });
    }
    out
}

/// The a.s. finite set of points with `y·V(x) > 1`: `Poisson(Λ)` many, with
/// `Λ = (2c_α/α)·∫V^α dm`, locations `∝ V^α dm`, magnitudes Pareto above `1/V`.
pub fn large_point_field(vk: &ValidatedKernel, stream: RngStream) -> Vec<MeasurePoint> {
    large_points(vk, 1.0, stream)
}

fn small_moment_density(c: f64, alpha: f64, v: f64, delta: f64, split: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    2.0 * c * delta.min(split / v).powf(2.0 - alpha) / (2.0 - alpha)
}

/// `∫ 2c_α·V(x)²·min(δ, 1/V(x))^{2-α}/(2-α) m(dx)`.
pub fn truncation_bound(vk: &ValidatedKernel, delta: f64) -> Result<f64> {
    truncation_bound_at(vk, delta, 1.0)
}

fn truncation_bound_at(vk: &ValidatedKernel, delta: f64, split: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain("delta must be positive"));
    }
    let (c, alpha) = (vk.space.c_alpha(), vk.space.alpha());
    vk.space.integrate(
        |x| {
            let v = vk.kernel.variation(x);
            v * v * small_moment_density(c, alpha, v, delta, split)
        },
        &vk.space.whole(),
    )
}

/// `(∫ |f(t, x)|^α m(dx))^{1/α}`: the scale of the stable law of `X_t`.
pub fn scale_parameter(vk: &ValidatedKernel, t: f64) -> Result<f64> {
    if !(0.0..=vk.kernel.horizon()).contains(&t) {
        return Err(domain(format!("t = {t} outside [0, {}]", vk.kernel.horizon())));
    }
    let alpha = vk.space.alpha();
    let i = vk.space.integrate(|x| vk.kernel.value(t, x).abs().powf(alpha), &vk.space.whole())?;
    Ok(i.powf(1.0 / alpha))
}

/// `Σ_i (±y_i)·f(t, x_i)` at each grid time, accumulated as the `f1` sum
/// minus the `f2` sum so that the map is exactly linear in the parts.
pub fn evaluate_points<'p, I>(kernel: &KernelSpec, points: I, grid: &[f64]) -> Vec<f64>
where
    I: IntoIterator<Item = &'p MeasurePoint> + Clone,
{
    grid.iter()
        .map(|&t| {
            let s1: f64 = points.clone().into_iter().map(|p| p.signed() * kernel.f1(t, p.location)).sum();
            match &kernel.f2 {
                None => s1,
                Some(f2) => s1 - points.clone().into_iter().map(|p| p.signed() * f2(t, p.location)).sum::<f64>(),
            }
        })
        .collect()
}

/// Treatment of the points below `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallPointMode {
    Drop,
    /// Centred Gaussian field with the covariance of the dropped points, on
    /// `GAUSS_CELLS` cells of the subdomain.
    Gaussian,
}

impl From<MarginalMode> for SmallPointMode {
    fn from(m: MarginalMode) -> Self {
        match m {
            MarginalMode::Drop => SmallPointMode::Drop,
            MarginalMode::Gaussian => SmallPointMode::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    /// Exhaustion element; `None` is the whole space.
    pub subdomain: Option<Subdomain>,
    pub small_points: SmallPointMode,
    /// Level of the large-point split, 1 by default.
    pub split: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        Self { subdomain: None, small_points: SmallPointMode::Drop, split: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralMeta {
    pub kernel: String,
    pub alpha: f64,
    pub delta: f64,
    pub subdomain: Subdomain,
    pub split: f64,
    pub small_points: SmallPointMode,
    pub truncation_bound: f64,
    pub large_count: usize,
    pub small_count: usize,
    pub stream: RngStream,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: IntegralMeta,
}

impl IntegralPath {
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "# kernel: {}", m.kernel);
        let _ = writeln!(out, "# seed: {}", m.stream.seed);
        let _ = writeln!(out, "# stream: {}", m.stream.stream);
        let _ = writeln!(out, "# alpha: {}", m.alpha);
        let _ = writeln!(out, "# delta: {:e}", m.delta);
        let _ = writeln!(out, "# subdomain: [{}, {}]", m.subdomain.lo, m.subdomain.hi);
        let _ = writeln!(out, "# split: {}", m.split);
        let _ = writeln!(out, "# small_points: {:?}", m.small_points);
        let _ = writeln!(out, "# truncation_bound: {:e}", m.truncation_bound);
        let _ = writeln!(out, "# points: {} large, {} small", m.large_count, m.small_count);
        out.push_str("time value\n");
        for (t, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:e} {v:e}");
        }
        out
    }
}

/// Points of one replicate: those with `y·V > split` and those on the
/// subdomain with `y >= δ`, `y·V <= split`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub large: Vec<MeasurePoint>,
    pub small: Vec<MeasurePoint>,
}

impl PointSet {
    pub fn iter(&self) -> impl Iterator<Item = &MeasurePoint> + Clone {
        self.large.iter().chain(self.small.iter())
    }
}

/// Reusable sampler for paths of one kernel at one `δ`.
#[derive(Debug, Clone)]
pub struct IntegralPlan<'k> {
    vk: &'k ValidatedKernel,
    delta: f64,
    grid: Vec<f64>,
    sub: Subdomain,
    options: IntegralOptions,
    small: LocationSampler,
    gauss: Vec<(f64, f64)>,
    truncation_bound: f64,
}

impl<'k> IntegralPlan<'k> {
    pub fn new(vk: &'k ValidatedKernel, delta: f64, grid: Vec<f64>, options: IntegralOptions) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(domain("delta must be positive and finite"));
        }
        if !(options.split > 0.0 && options.split.is_finite()) {
            return Err(domain("split level must be positive"));
        }
        let a = vk.kernel.horizon();
        if let Some(t) = grid.iter().find(|t| !(0.0..=a).contains(*t)) {
            return Err(domain(format!("grid time {t} outside [0, {a}]")));
        }
        let sub = options.subdomain.unwrap_or_else(|| vk.space.whole());
        let small = LocationSampler::build(&vk.space, &sub, None).map_err(|e| contract(format!("subdomain mass: {e}")))?;
        let gauss = match options.small_points {
            SmallPointMode::Drop => Vec::new(),
            SmallPointMode::Gaussian => gauss_cells(vk, &sub, delta, options.split)?,
        };
        Ok(Self {
            vk,
            delta,
            grid,
            sub,
            options,
            small,
            gauss,
            truncation_bound: truncation_bound_at(vk, delta, options.split)?,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn points(&self, stream: RngStream) -> PointSet {
        let large = large_points(self.vk, self.options.split, stream.child(LARGE_TAG));
        let space = &self.vk.space;
        let mean = self.small.total * space.jump_tail(self.delta);
        let mut small = draw_points(&self.small, mean, self.delta, space.alpha(), stream.child(SMALL_TAG));
        let split = self.options.split;
        small.retain(|p| p.magnitude * self.vk.kernel.variation(p.location) <= split);
        PointSet { large, small }
    }

    pub fn sample(&self, stream: RngStream) -> Result<IntegralPath> {
        let pts = self.points(stream);
        let mut values = evaluate_points(&self.vk.kernel, pts.iter(), &self.grid);
        if !self.gauss.is_empty() {
            let mut rng = stream.child(GAUSS_TAG).rng();
            let z: Vec<f64> = (0..self.gauss.len()).map(|_| rng.sample(StandardNormal)).collect();
            for (v, &t) in values.iter_mut().zip(&self.grid) {
                *v += self.gauss.iter().zip(&z).map(|(&(x, sd), z)| sd * z * self.vk.kernel.value(t, x)).sum::<f64>();
            }
        }
        Ok(IntegralPath {
            grid: self.grid.clone(),
            values,
            meta: IntegralMeta {
                kernel: self.vk.kernel.name.clone(),
                alpha: self.vk.space.alpha(),
                delta: self.delta,
                subdomain: self.sub,
                split: self.options.split,
                small_points: self.options.small_points,
                truncation_bound: self.truncation_bound,
                large_count: pts.large.len(),
                small_count: pts.small.len(),
                stream,
            },
        })
    }
}

/// `(x_k, sd_k)`: cell location and standard deviation of the dropped mass there.
fn gauss_cells(vk: &ValidatedKernel, sub: &Subdomain, delta: f64, split: f64) -> Result<Vec<(f64, f64)>> {
    let (c, alpha) = (vk.space.c_alpha(), vk.space.alpha());
    let s2 = |x: f64| {
        let v = vk.kernel.variation(x);
        if v <= 0.0 {
            2.0 * c * delta.powf(2.0 - alpha) / (2.0 - alpha)
        } else {
            small_moment_density(c, alpha, v, delta, split)
        }
    };
    match vk.space.domain() {
        Domain::Interval { lo, hi, .. } => {
            let (a, b) = (lo.max(sub.lo), hi.min(sub.hi));
            if !(a < b) {
                return Ok(Vec::new());
            }
            let h = (b - a) / GAUSS_CELLS as f64;
            (0..GAUSS_CELLS)
                .map(|k| {
                    let cell = Subdomain { lo: a + k as f64 * h, hi: a + (k + 1) as f64 * h };
                    Ok((a + (k as f64 + 0.5) * h, vk.space.integrate(s2, &cell)?.sqrt()))
                })
                .collect()
        }
        Domain::Discrete { points, weights } => Ok(points
            .iter()
            .zip(weights)
            .filter(|(x, _)| sub.contains(**x))
            .map(|(&x, &w)| (x, (w * s2(x)).sqrt()))
            .collect()),
    }
}

/// One path at `δ` with default options.
pub fn integral_path(vk: &ValidatedKernel, delta: f64, grid: &[f64], stream: RngStream) -> Result<IntegralPath> {
    IntegralPlan::new(vk, delta, grid.to_vec(), IntegralOptions::default())?.sample(stream)
}

fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| horizon * i as f64 / (points - 1) as f64).collect()
}

/// Paths at `δ` and `δ/2` built from the same `δ/2` point field: their
/// difference is the sum over points with `δ/2 <= y < δ`. Compares
/// `E sup_t |difference|²` over the grid and the point locations with
/// `c_cal·(truncation_bound(δ) - truncation_bound(δ/2))`.
pub fn integral_refinement_check(
    vk: &ValidatedKernel,
    delta: f64,
    reps: usize,
    stream: RngStream,
    c_cal: f64,
    exec: Execution,
) -> Result<VerificationReport> {
    if reps < 100 {
        return Err(domain(format!("at least 100 replicates required, got {reps}")));
    }
    let a = vk.kernel.horizon();
    let plan = IntegralPlan::new(vk, 0.5 * delta, uniform_grid(a, SUP_GRID_POINTS), IntegralOptions::default())?;
    let sq = try_map_indexed(reps, exec, |r| {
        let pts = plan.points(stream.replicate(r as u64));
        let band: Vec<MeasurePoint> = pts.small.iter().filter(|p| p.magnitude < delta).copied().collect();
        let mut times = plan.grid().to_vec();
        times.extend(band.iter().map(|p| p.location).filter(|x| (0.0..=a).contains(x)));
        let diff = evaluate_points(&vk.kernel, band.iter(), &times);
        let sup = diff.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        Ok(sup * sup)
    })?;
    let numer = mean(&sq);
    let bound = truncation_bound(vk, delta)? - truncation_bound(vk, 0.5 * delta)?;
    let ratio = if bound > 0.0 { numer / bound } else { 0.0 };
    let mut rep = VerificationReport::new("integral_refinement", reps, stream);
    rep.check(
        format!("ratio_delta{delta:e}"),
        ratio,
        c_cal,
        Provenance::Calibrated,
        format!("ratio <= C_cal = {c_cal}"),
        ratio <= c_cal,
    );
    rep.notes.push(format!(
        "kernel {}, mean squared sup distance {numer:e} (se {:e}), bound {bound:e}",
        vk.kernel.name,
        std_err(&sq)
    ));
    Ok(rep)
}

/// Sample size of the distance-correlation tests.
pub const DCOR_SAMPLE: usize = 500;
pub const DCOR_PERMUTATIONS: usize = 499;

/// `X_t = M([0, t])` for uniform `m` on `[0, 1]` against the Lévy-process
/// properties: ECF of `X_1`, independence and equal laws of the increments
/// over thirds, and the law of `X_1` against the direct sampler.
///
/// `δ` is the largest `2^{-j}` whose residual scale is below
/// `MARGINAL_TOLERANCE` times the oracle IQR; for `α > 1` the dropped points
/// are replaced by their Gaussian counterpart.
pub fn levy_suite(alpha: f64, reps: usize, stream: RngStream, exec: Execution) -> Result<VerificationReport> {
    if reps < DCOR_SAMPLE {
        return Err(domain(format!("at least {DCOR_SAMPLE} replicates required, got {reps}")));
    }
    let space = StableMeasureSpace::interval(0.0, 1.0, alpha)?;
    let kernel = KernelRegistry::with_builtins().build("indicator", &BTreeMap::new(), 1.0)?;
    let vk = ValidatedKernel::new(&kernel, &space)?;
    let mode = MarginalMode::default_for(alpha);
    let oracle = try_map_indexed(reps, exec, |r| {
        Ok(chambers_mallows_stuck(alpha, &mut stream.child(ORACLE_TAG).replicate(r as u64).rng()))
    })?;
    let tol = MARGINAL_TOLERANCE * interquartile_range(&oracle);
    let mut delta = 1.0;
    while marginal_residual(alpha, 1.0, delta, mode)? >= tol {
        delta *= 0.5;
    }
    let grid = vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    let plan = IntegralPlan::new(&vk, delta, grid, IntegralOptions { small_points: mode.into(), ..Default::default() })?;
    let paths = try_map_indexed(reps, exec, |r| Ok(plan.sample(stream.replicate(r as u64))?.values))?;
    let x1: Vec<f64> = paths.iter().map(|v| v[3]).collect();
    let inc: Vec<Vec<f64>> = (0..3).map(|j| paths.iter().map(|v| v[j + 1] - v[j]).collect()).collect();

    let mut rep = VerificationReport::new("levy_oracle", reps, stream);
    let scale = scale_parameter(&vk, 1.0)?;
    let mut plot = PlotData::new("ecf", &["theta", "re", "im", "se_re", "se_im", "target"]);
    for theta in [0.5, 1.0, 2.0] {
        let e = EcfPoint::compute(&x1, theta, (-(scale * theta).powf(alpha)).exp());
        rep.check(
            format!("ecf_theta{theta}"),
            e.re,
            e.target,
            Provenance::AnalyticFormula,
            format!("re and im within {BAND_SE} se"),
            e.within(BAND_SE),
        );
        plot.rows.push(vec![theta, e.re, e.im, e.se_re, e.se_im, e.target]);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let d = dcor_permutation_test(
            &rank_transform(&inc[i][..DCOR_SAMPLE]),
            &rank_transform(&inc[j][..DCOR_SAMPLE]),
            DCOR_PERMUTATIONS,
            stream.child(PERM_TAG).replicate((3 * i + j) as u64),
        )?;
        rep.check(
            format!("dcor_inc{}_inc{}", i + 1, j + 1),
            d.dcor,
            d.p_value,
            Provenance::Theorem,
            format!("p > {SIGNIFICANCE}"),
            d.p_value > SIGNIFICANCE,
        );
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let ks = two_sample_ks(&inc[i], &inc[j])?;
        rep.check(
            format!("ks_inc{}_inc{}", i + 1, j + 1),
            ks.statistic,
            ks.p_value,
            Provenance::Theorem,
            format!("p > {SIGNIFICANCE}"),
            ks.p_value > SIGNIFICANCE,
        );
    }
    let ks = two_sample_ks(&x1, &oracle)?;
    rep.check(
        "ks_x1_oracle".into(),
        ks.statistic,
        ks.p_value,
        Provenance::DirectSampler,
        format!("p > {SIGNIFICANCE}"),
        ks.p_value > SIGNIFICANCE,
    );
    rep.plots.push(plot);
    rep.notes.push(format!(
        "alpha {alpha}, delta {delta:e}, small points {:?}, residual {:e}, scale {scale}",
        SmallPointMode::from(mode),
        marginal_residual(alpha, 1.0, delta, mode)?
    ));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(alpha: f64) -> StableMeasureSpace {
        StableMeasureSpace::interval(0.0, 1.0, alpha).unwrap()
    }

    fn indicator() -> KernelSpec {
        KernelRegistry::with_builtins().build("indicator", &BTreeMap::new(), 1.0).unwrap()
    }

    #[test]
    fn mean_count_and_large_rate() {
        let space = unit(1.0);
        assert!((space.jump_tail(1.0) - 2.0 / PI).abs() < 1e-12);
        let one = KernelSpec::new("one", |_, _| 1.0, 1.0).unwrap();
        let vk = ValidatedKernel::new(&one, &space).unwrap();
        assert!((vk.report().large_point_rate - 2.0 / PI).abs() < 1e-12);
        assert!((truncation_bound(&vk, 0.01).unwrap() - 0.02 / PI).abs() < 1e-12);
        let twice = ValidatedKernel::new(&one.scaled(2.0).unwrap(), &unit(1.5)).unwrap();
        let base = ValidatedKernel::new(&one, &unit(1.5)).unwrap();
        let r = twice.report().large_point_rate / base.report().large_point_rate;
        assert!((r - 2f64.powf(1.5)).abs() < 1e-10);
    }

    #[test]
    fn scale_of_indicator() {
        let vk = ValidatedKernel::new(&indicator(), &unit(1.0)).unwrap();
        assert!((scale_parameter(&vk, 0.5).unwrap() - 0.5).abs() < 1e-10);
        let vk = ValidatedKernel::new(&indicator(), &unit(0.7)).unwrap();
        assert!((scale_parameter(&vk, 0.5).unwrap() - 0.5f64.powf(1.0 / 0.7)).abs() < 1e-10);
    }

    #[test]
    fn single_point_path() {
        let p = [MeasurePoint { magnitude: 2.0, sign: 1, location: 0.3 }];
        let v = evaluate_points(&indicator(), p.iter(), &[0.0, 0.29, 0.3, 1.0]);
        assert_eq!(v, vec![0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn rejection_witness() {
        let k = KernelSpec::new("cos", |t: f64, _| t.cos() + 1.0, 1.0).unwrap();
        let w = monotonicity_witness(&k, &[0.0, 1.0], &[0.5]).unwrap();
        assert_eq!((w.t, w.t_prime), (0.0, 1.0));
        assert!(matches!(validate_kernel(&k, &unit(1.0), &[0.0, 1.0], &[0.5]), Err(Error::Assumption(_))));
    }

    #[test]
    fn linear_kernel_integral() {
        let k = KernelRegistry::with_builtins().build("linear", &BTreeMap::new(), 1.0).unwrap();
        let vk = ValidatedKernel::new(&k, &unit(1.5)).unwrap();
        assert!((vk.report().f1_alpha_integral - 1.0 / 2.5).abs() < 1e-10);
    }

    #[test]
    fn discrete_single_atom() {
        let space = StableMeasureSpace::discrete(vec![0.25], vec![1.0], 1.2).unwrap();
        let pts = sample_measure_points(&space, 0.05, &space.whole(), RngStream::root(3)).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p.location == 0.25 && p.magnitude >= 0.05));
    }

    #[test]
    fn registry_rejects_unknown() {
        let r = KernelRegistry::with_builtins();
        assert!(matches!(r.build("nope", &BTreeMap::new(), 1.0), Err(Error::Config(_))));
        let p = BTreeMap::from([("bogus".to_string(), 1.0)]);
        assert!(matches!(r.build("indicator", &p, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn weighted_locations_follow_density() {
        let space = StableMeasureSpace::interval_with_density(0.0, 1.0, |x| 2.0 * x, 1.0).unwrap();
        let pts = sample_measure_points(&space, 1e-3, &space.whole(), RngStream::root(9)).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.location).collect();
        let ks = crate::stats::ks_statistic(&xs, |x| x.clamp(0.0, 1.0).powi(2)).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }
}
