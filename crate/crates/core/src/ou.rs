//! Projected OU paths `Y_t = ⟨X_t, z⟩` assembled from jump fields.
//!
//! Coordinate `n` contributes `Σ_i b_n·sgn(z_n)·(±y_i)·e^{-γ_n(t-t_i)}` over
//! its jumps with `t_i <= t`. Each coordinate is evaluated by one forward
//! sweep over its jumps and the grid, so grid values carry no
//! discretization error beyond the δ and `n_max` truncations.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{contract, domain, Result};
use crate::field::{coordinate_points, JumpPoint};
use crate::model::DiagonalModel;
use crate::rng::RngStream;
use crate::tail::{truncation_bounds, TruncationBounds};

/// Strictly increasing evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(domain("time grid is empty"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(domain("grid times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("grid times must be strictly increasing"));
        }
        Ok(Self { times })
    }

    /// `points` equispaced times covering `[0, horizon]`; a single point is `horizon`.
    pub fn uniform(horizon: f64, points: usize) -> Result<Self> {
        if !(horizon > 0.0) || points == 0 {
            return Err(domain("uniform grid needs a positive horizon and at least one point"));
        }
        if points == 1 {
            return Self::new(vec![horizon]);
        }
        let last = (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|i| horizon * i as f64 / last).collect();
        times[points - 1] = horizon;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Union with `extra` times inside `[0, end]`.
    fn refined(&self, mut extra: Vec<f64>) -> Self {
        let end = self.end();
        extra.retain(|t| *t <= end);
        extra.extend_from_slice(&self.times);
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        Self { times: extra }
    }
}

/// Sub-paths of the ε-split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Components {
    /// OU response to jumps with `b_n·y >= ε`.
    pub large: Vec<f64>,
    /// `L^(ε)`: undamped sum of the jumps with `δ <= b_n·y < ε`.
    pub martingale: Vec<f64>,
    /// `L^(ε) - Y^(ε)`: the summands `b_n·y·(1 - e^{-γ_n(t-t_i)})₊` with signs.
    pub remainder: Vec<f64>,
}

impl Components {
    /// `Y^(ε)`, the OU response to the small jumps.
    pub fn small(&self) -> Vec<f64> {
        self.martingale.iter().zip(&self.remainder).map(|(m, r)| m - r).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathMeta {
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub n_from: usize,
    pub n_max: usize,
    pub stream: RngStream,
    pub model_hash: String,
    pub bounds: TruncationBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub components: Option<Components>,
    pub meta: PathMeta,
}

impl PathSample {
    /// Largest `|values - (large + martingale - remainder)|`, zero without components.
    pub fn split_identity_error(&self) -> f64 {
        self.components.as_ref().map_or(0.0, |c| {
            self.values
                .iter()
                .enumerate()
                .map(|(i, v)| (v - (c.large[i] + c.martingale[i] - c.remainder[i])).abs())
                .fold(0.0, f64::max)
        })
    }

    /// Scale for the split identity: the largest component magnitude, at least 1.
    pub fn split_identity_scale(&self) -> f64 {
        self.components.as_ref().map_or(1.0, |c| {
            c.large
                .iter()
                .chain(&c.martingale)
                .chain(&c.remainder)
                .chain(&self.values)
                .fold(1.0, |m, v| m.max(v.abs()))
        })
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Columnar text with a `#` metadata header.
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:e}"));
        let _ = writeln!(out, "# model_hash: {}", m.model_hash);
        let _ = writeln!(out, "# seed: {}", m.stream.seed);
        let _ = writeln!(out, "# stream: {}", m.stream.stream);
        let _ = writeln!(out, "# delta: {:e}", m.delta);
        let _ = writeln!(out, "# epsilon: {}", opt(m.epsilon));
        let _ = writeln!(out, "# coordinates: {}..={}", m.n_from, m.n_max);
        let _ = writeln!(out, "# small_jump_l2: {:e}", m.bounds.small_jump_l2);
        let _ = writeln!(out, "# omitted_l2: {}", opt(m.bounds.omitted_l2));
        let _ = writeln!(out, "# omitted_jump_rate: {}", opt(m.bounds.omitted_jump_rate));
        match &self.components {
            None => {
                out.push_str("time value\n");
                for (t, v) in self.grid.iter().zip(&self.values) {
                    let _ = writeln!(out, "{t:e} {v:e}");
                }
            }
            Some(c) => {
                out.push_str("time value large martingale remainder\n");
                for i in 0..self.grid.len() {
                    let _ = writeln!(
                        out,
                        "{:e} {:e} {:e} {:e} {:e}",
                        self.grid[i], self.values[i], c.large[i], c.martingale[i], c.remainder[i]
                    );
                }
            }
        }
        out
    }
}

/// Adds `Σ_{t_j <= t} dx_j·e^{-γ(t - t_j)}` at each grid time `t` to `out`.
/// With `γ = 0` this is the running sum of increments.
fn sweep_into<I>(jumps: I, gamma: f64, grid: &[f64], out: &mut [f64])
where
    I: Iterator<Item = (f64, f64)>,
{
    let mut jumps = jumps.peekable();
    let mut v = 0.0;
    let mut t_last = 0.0;
    for (&g, o) in grid.iter().zip(out.iter_mut()) {
        while let Some(&(t, dx)) = jumps.peek() {
            if t > g {
                break;
            }
            v = v * (-gamma * (t - t_last)).exp() + dx;
            t_last = t;
            jumps.next();
        }
        *o += v * (-gamma * (g - t_last)).exp();
    }
}

/// One coordinate's OU path on `grid` from its time-sorted points.
pub fn coordinate_path(points: &[JumpPoint], gamma: f64, b: f64, sign_z: i8, grid: &[f64]) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(domain(format!("gamma must be positive, got {gamma}")));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(domain(format!("b must be nonnegative, got {b}")));
    }
    if !(-1..=1).contains(&sign_z) {
        return Err(domain("sign_z must be -1, 0 or +1"));
    }
    if points.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(contract("jump points are not sorted by time"));
    }
    if points.iter().any(|p| !(p.time >= 0.0)) {
        return Err(domain("jump times must be nonnegative"));
    }
    TimeGrid::new(grid.to_vec())?;
    let mut out = vec![0.0; grid.len()];
    let scale = b * sign_z as f64;
    if scale != 0.0 {
        sweep_into(points.iter().map(|p| (p.time, scale * p.signed())), gamma, grid, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Coordinate {
    n: usize,
    gamma: f64,
    b: f64,
    scale: f64,
}

/// Fixed truncation and grid for repeated path draws from one model.
///
/// Truncation bounds are computed once here, so ensembles should build a
/// plan and call [`PathPlan::sample`] per replicate.
#[derive(Debug, Clone)]
pub struct PathPlan<'m> {
    model: &'m DiagonalModel,
    delta: f64,
    epsilon: Option<f64>,
    coords: RangeInclusive<usize>,
    active: Vec<Coordinate>,
    grid: TimeGrid,
    bounds: TruncationBounds,
    hash: String,
}

impl<'m> PathPlan<'m> {
    /// Unsplit plan over coordinates `1..=n_max`.
    pub fn project(model: &'m DiagonalModel, delta: f64, n_max: usize, grid: TimeGrid) -> Result<Self> {
        Self::build(model, delta, None, 1..=n_max, grid)
    }

    /// Split plan over coordinates `1..=n_max`; requires `0 < δ < ε`.
    pub fn split(model: &'m DiagonalModel, epsilon: f64, delta: f64, n_max: usize, grid: TimeGrid) -> Result<Self> {
        Self::build(model, delta, Some(epsilon), 1..=n_max, grid)
    }

    /// Split plan restricted to coordinates `k..=m`.
    pub fn split_window(
        model: &'m DiagonalModel,
        epsilon: f64,
        delta: f64,
        window: RangeInclusive<usize>,
        grid: TimeGrid,
    ) -> Result<Self> {
        Self::build(model, delta, Some(epsilon), window, grid)
    }

    fn build(
        model: &'m DiagonalModel,
        delta: f64,
        epsilon: Option<f64>,
        coords: RangeInclusive<usize>,
        grid: TimeGrid,
    ) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(domain(format!("delta must be positive, got {delta}")));
        }
        if let Some(eps) = epsilon {
            if !(eps > 0.0) {
                return Err(domain("epsilon must be positive"));
            }
            if delta >= eps {
                return Err(contract(format!("split needs delta < epsilon, got delta={delta}, epsilon={eps}")));
            }
        }
        let (from, to) = (*coords.start(), *coords.end());
        if from == 0 || to < from {
            return Err(domain("coordinate range must satisfy 1 <= n_from <= n_max"));
        }
        if grid.end() > model.horizon {
            return Err(domain(format!("grid ends at {} past the horizon {}", grid.end(), model.horizon)));
        }
        let to = model.effective_n_max(to);
        let active = (from..=to)
            .filter_map(|n| {
                let scale = model.b(n) * model.sign_z(n) as f64;
                (scale != 0.0).then(|| Coordinate {
                    n,
                    gamma: model.gamma(n),
                    b: model.b(n),
                    scale,
                })
            })
            .collect();
        let bounds = truncation_bounds(model, delta, to)?;
        Ok(Self {
            model,
            delta,
            epsilon,
            coords: from..=to,
            active,
            grid,
            bounds,
            hash: model.hash(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bounds(&self) -> &TruncationBounds {
        &self.bounds
    }

    fn meta(&self, stream: RngStream) -> PathMeta {
        PathMeta {
            delta: self.delta,
            epsilon: self.epsilon,
            n_from: *self.coords.start(),
            n_max: *self.coords.end(),
            stream,
            model_hash: self.hash.clone(),
            bounds: self.bounds.clone(),
        }
    }

    fn draw(&self, stream: RngStream) -> Result<Vec<(Coordinate, Vec<JumpPoint>)>> {
        self.active
            .iter()
            .map(|c| Ok((*c, coordinate_points(self.model, self.delta, c.n, stream)?)))
            .collect()
    }

    /// One path on the plan grid.
    pub fn sample(&self, stream: RngStream) -> Result<PathSample> {
        let fields = self.draw(stream)?;
        Ok(self.assemble(&fields, self.grid.clone(), stream))
    }

    /// One path on the plan grid refined by every jump time up to the grid end.
    pub fn sample_refined(&self, stream: RngStream) -> Result<PathSample> {
        let fields = self.draw(stream)?;
        let times = fields.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.time)).collect();
        let grid = self.grid.refined(times);
        Ok(self.assemble(&fields, grid, stream))
    }

    fn assemble(&self, fields: &[(Coordinate, Vec<JumpPoint>)], grid: TimeGrid, stream: RngStream) -> PathSample {
        let g = grid.times();
        let len = g.len();
        let mut values = vec![0.0; len];
        let components = match self.epsilon {
            None => {
                for (c, pts) in fields {
                    sweep_into(pts.iter().map(|p| (p.time, c.scale * p.signed())), c.gamma, g, &mut values);
                }
                None
            }
            Some(eps) => {
                let mut large = vec![0.0; len];
                let mut small = vec![0.0; len];
                let mut martingale = vec![0.0; len];
                for (c, pts) in fields {
                    let is_large = |p: &&JumpPoint| c.b * p.magnitude >= eps;
                    let inc = |p: &JumpPoint| (p.time, c.scale * p.signed());
                    sweep_into(pts.iter().filter(is_large).map(inc), c.gamma, g, &mut large);
                    sweep_into(pts.iter().filter(|p| !is_large(p)).map(inc), c.gamma, g, &mut small);
                    sweep_into(pts.iter().filter(|p| !is_large(p)).map(inc), 0.0, g, &mut martingale);
                }
                let remainder: Vec<f64> = martingale.iter().zip(&small).map(|(m, s)| m - s).collect();
                for i in 0..len {
                    values[i] = large[i] + small[i];
                }
                Some(Components {
                    large,
                    martingale,
                    remainder,
                })
            }
        };
        PathSample {
            grid: grid.times,
            values,
            components,
            meta: self.meta(stream),
        }
    }
}

/// `Y` on `grid` from coordinates `1..=n_max`, keeping jumps with `b_n·y >= δ`.
pub fn project_path(model: &DiagonalModel, delta: f64, n_max: usize, grid: TimeGrid, stream: RngStream) -> Result<PathSample> {
    PathPlan::project(model, delta, n_max, grid)?.sample(stream)
}

/// `Y` with its ε-split components; uses the same jump draws as [`project_path`].
pub fn split_path(
    model: &DiagonalModel,
    epsilon: f64,
    delta: f64,
    n_max: usize,
    grid: TimeGrid,
    stream: RngStream,
) -> Result<PathSample> {
    PathPlan::split(model, epsilon, delta, n_max, grid)?.sample(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::LevyMeasure;
    use crate::model::Sequence;

    fn jump(time: f64, magnitude: f64, sign: i8) -> JumpPoint {
        JumpPoint {
            coord: 1,
            time,
            magnitude,
            sign,
        }
    }

    #[test]
    fn single_jump_response() {
        let v = coordinate_path(&[jump(0.5, 2.0, 1)], 1.0, 1.0, 1, &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 2.0);
        assert!((v[2] - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficient_and_additivity() {
        let pts = [jump(0.1, 1.0, 1), jump(0.4, 3.0, -1)];
        let grid = [0.0, 0.2, 0.4, 0.7, 1.0];
        assert!(coordinate_path(&pts, 2.0, 0.0, 1, &grid).unwrap().iter().all(|v| *v == 0.0));
        let both = coordinate_path(&pts, 2.0, 0.7, -1, &grid).unwrap();
        let a = coordinate_path(&pts[..1], 2.0, 0.7, -1, &grid).unwrap();
        let b = coordinate_path(&pts[1..], 2.0, 0.7, -1, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((both[i] - a[i] - b[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn unsorted_points_rejected() {
        let r = coordinate_path(&[jump(0.5, 1.0, 1), jump(0.2, 1.0, 1)], 1.0, 1.0, 1, &[1.0]);
        assert!(matches!(r, Err(crate::Error::Contract(_))));
    }

    #[test]
    fn split_of_single_small_jump() {
        let model = DiagonalModel::single(LevyMeasure::stable(1.0).unwrap(), 1.0, 1.0).unwrap();
        let plan = PathPlan::split(&model, 1.0, 0.1, 1, TimeGrid::new(vec![0.5, 1.0]).unwrap()).unwrap();
        let fields = vec![(plan.active[0], vec![jump(0.5, 0.5, 1)])];
        let p = plan.assemble(&fields, plan.grid.clone(), RngStream::root(0));
        let c = p.components.as_ref().unwrap();
        assert_eq!(c.large, vec![0.0, 0.0]);
        assert_eq!(c.martingale, vec![0.5, 0.5]);
        assert_eq!(c.remainder[0], 0.0);
        assert!((c.remainder[1] - 0.5 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((p.values[1] - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn threshold_jump_is_large() {
        let model = DiagonalModel::single(LevyMeasure::stable(1.0).unwrap(), 0.5, 1.0).unwrap();
        let plan = PathPlan::split(&model, 1.0, 0.1, 1, TimeGrid::new(vec![1.0]).unwrap()).unwrap();
        let fields = vec![(plan.active[0], vec![jump(0.5, 2.0, 1)])];
        let p = plan.assemble(&fields, plan.grid.clone(), RngStream::root(0));
        let c = p.components.unwrap();
        assert!(c.large[0] > 0.0);
        assert_eq!(c.martingale[0], 0.0);
    }

    #[test]
    fn delta_at_epsilon_is_contract_violation() {
        let model = DiagonalModel::stable_power(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = split_path(&model, 0.5, 0.5, 4, TimeGrid::uniform(1.0, 3).unwrap(), RngStream::root(1));
        assert!(matches!(r, Err(crate::Error::Contract(_))));
    }

    #[test]
    fn split_matches_projection_and_identity() {
        let model = DiagonalModel::stable_power(1.2, 1.0, 1.0, 0.5, 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 101).unwrap();
        for seed in 0..20 {
            let s = RngStream::root(seed);
            let y = project_path(&model, 1e-3, 50, grid.clone(), s).unwrap();
            let sp = split_path(&model, 0.2, 1e-3, 50, grid.clone(), s).unwrap();
            assert!(sp.split_identity_error() <= 1e-12 * sp.split_identity_scale());
            for (a, b) in y.values.iter().zip(&sp.values) {
                assert!((a - b).abs() <= 1e-12 * sp.split_identity_scale());
            }
        }
    }

    #[test]
    fn n_max_one_is_coordinate_path() {
        let model = DiagonalModel::stable_power(0.8, 2.0, 1.0, 1.0, 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let s = RngStream::root(3);
        let y = project_path(&model, 1e-2, 1, grid.clone(), s).unwrap();
        let pts = coordinate_points(&model, 1e-2, 1, s).unwrap();
        let c = coordinate_path(&pts, model.gamma(1), model.b(1), model.sign_z(1), grid.times()).unwrap();
        assert_eq!(y.values, c);
    }

    #[test]
    fn zero_projection_gives_zero_path() {
        let model = DiagonalModel::new(
            Sequence::power(1.0, 1.0),
            Sequence::power(1.0, -1.0),
            Sequence::Table(vec![0.0; 5]),
            crate::model::MeasureFamily::Common(LevyMeasure::stable(1.0).unwrap()),
            1.0,
        )
        .unwrap();
        let y = project_path(&model, 1e-3, 5, TimeGrid::uniform(1.0, 5).unwrap(), RngStream::root(2)).unwrap();
        assert!(y.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn refined_grid_contains_jump_times() {
        let model = DiagonalModel::single(LevyMeasure::stable(1.0).unwrap(), 1.0, 1.0).unwrap();
        let plan = PathPlan::split(&model, 1.0, 0.05, 1, TimeGrid::uniform(1.0, 3).unwrap()).unwrap();
        let p = plan.sample_refined(RngStream::root(9)).unwrap();
        let pts = coordinate_points(&model, 0.05, 1, RngStream::root(9)).unwrap();
        assert!(!pts.is_empty());
        for q in &pts {
            assert!(p.grid.contains(&q.time));
        }
        // the remainder vanishes at the first jump time
        let i = p.grid.iter().position(|t| *t == pts[0].time).unwrap();
        assert_eq!(p.components.unwrap().remainder[i], 0.0);
    }
}
