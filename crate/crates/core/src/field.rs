//! Poisson jump fields.
//!
//! For coordinate `n` the points `(t_i, y_i)` form a Poisson random measure
//! on `[0, a] × [δ, ∞)` with intensity `dt ⊗ 2ν_n(dy)`, and each point
//! carries an independent Rademacher sign. Signs are stored raw; the
//! projection sign `sgn⟨z, e_n⟩` is applied when paths are assembled.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Error, Result};
use crate::measure::LevyMeasure;
use crate::model::DiagonalModel;
use crate::rng::{self, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPoint {
    pub coord: usize,
    pub time: f64,
    pub magnitude: f64,
    pub sign: i8,
}

impl JumpPoint {
    #[inline]
    pub fn signed(&self) -> f64 {
        self.sign as f64 * self.magnitude
    }
}

/// A realized set of jump points, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpField {
    points: Vec<JumpPoint>,
    horizon: f64,
    trunc_delta: Vec<(usize, f64)>,
    split_epsilon: Option<f64>,
    stream: RngStream,
}

pub(crate) fn sort_points(points: &mut [JumpPoint]) {
    points.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.coord.cmp(&b.coord)));
}

impl JumpField {
    /// Assemble a field, checking order, time range and truncation levels.
    pub fn new(
        points: Vec<JumpPoint>,
        horizon: f64,
        trunc_delta: Vec<(usize, f64)>,
        split_epsilon: Option<f64>,
        stream: RngStream,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(domain("horizon must be positive"));
        }
        for w in points.windows(2) {
            if w[1].time < w[0].time {
                return Err(contract("jump points are not sorted by time"));
            }
        }
        let levels: std::collections::HashMap<usize, f64> = trunc_delta.iter().copied().collect();
        for p in &points {
            if !(0.0..=horizon).contains(&p.time) {
                return Err(contract(format!("jump time {} outside [0, {horizon}]", p.time)));
            }
            if p.sign != 1 && p.sign != -1 {
                return Err(contract(format!("invalid sign {}", p.sign)));
            }
            let level = *levels
                .get(&p.coord)
                .ok_or_else(|| contract(format!("no truncation level for coordinate {}", p.coord)))?;
            if p.magnitude < level {
                return Err(contract(format!(
                    "magnitude {} below truncation level {level} of coordinate {}",
                    p.magnitude, p.coord
                )));
            }
        }
        Ok(Self {
            points,
            horizon,
            trunc_delta,
            split_epsilon,
            stream,
        })
    }

    pub fn points(&self) -> &[JumpPoint] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn trunc_delta(&self) -> &[(usize, f64)] {
        &self.trunc_delta
    }

    pub fn split_epsilon(&self) -> Option<f64> {
        self.split_epsilon
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points of one coordinate, in time order.
    pub fn coordinate(&self, n: usize) -> Vec<JumpPoint> {
        self.points.iter().copied().filter(|p| p.coord == n).collect()
    }

    /// Columnar text: a `#` header block, a column row, one point per row.
    /// Floats use shortest round-trip formatting, so parsing is bit-exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# levy-ou jump-field v1");
        let _ = writeln!(s, "# seed = {}", self.stream.seed);
        let _ = writeln!(s, "# stream = {}", self.stream.stream);
        let _ = writeln!(s, "# horizon = {:e}", self.horizon);
        match self.split_epsilon {
            Some(e) => {
                let _ = writeln!(s, "# epsilon = {e:e}");
            }
            None => {
                let _ = writeln!(s, "# epsilon = none");
            }
        }
        let deltas: Vec<String> = self.trunc_delta.iter().map(|(c, d)| format!("{c}:{d:e}")).collect();
        let _ = writeln!(s, "# delta = {}", deltas.join(","));
        let _ = writeln!(s, "coord time magnitude sign");
        for p in &self.points {
            let _ = writeln!(s, "{} {:e} {:e} {}", p.coord, p.time, p.magnitude, p.sign);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        let (mut seed, mut stream, mut horizon) = (None, None, None);
        let mut epsilon = None;
        let mut deltas = Vec::new();
        let mut columns_seen = false;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.split_once('=') else {
                    continue;
                };
                let value = value.trim();
                let num = |v: &str| v.parse::<f64>().map_err(|e| perr(i, format!("{v}: {e}")));
                match key.trim() {
                    "seed" => seed = Some(value.parse::<u64>().map_err(|e| perr(i, e.to_string()))?),
                    "stream" => stream = Some(value.parse::<u64>().map_err(|e| perr(i, e.to_string()))?),
                    "horizon" => horizon = Some(num(value)?),
                    "epsilon" if value == "none" => epsilon = None,
                    "epsilon" => epsilon = Some(num(value)?),
                    "delta" => {
                        for item in value.split(',').filter(|s| !s.is_empty()) {
                            let (c, d) = item
                                .split_once(':')
                                .ok_or_else(|| perr(i, format!("bad delta entry `{item}`")))?;
                            let c = c.parse::<usize>().map_err(|e| perr(i, e.to_string()))?;
                            deltas.push((c, num(d)?));
                        }
                    }
                    other => return Err(perr(i, format!("unknown header key `{other}`"))),
                }
                continue;
            }
            if !columns_seen {
                if line.split_whitespace().collect::<Vec<_>>() != ["coord", "time", "magnitude", "sign"] {
                    return Err(perr(i, format!("expected column header, found `{line}`")));
                }
                columns_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(perr(i, format!("expected 4 columns, found {}", cols.len())));
            }
            let f = |s: &str| s.parse::<f64>().map_err(|e| perr(i, format!("{s}: {e}")));
            points.push(JumpPoint {
                coord: cols[0].parse().map_err(|e| perr(i, format!("{}: {e}", cols[0])))?,
                time: f(cols[1])?,
                magnitude: f(cols[2])?,
                sign: cols[3].parse().map_err(|e| perr(i, format!("{}: {e}", cols[3])))?,
            });
        }
        let missing = |k: &str| Error::Parse {
            line: 1,
            msg: format!("missing header `{k}`"),
        };
        Self::new(
            points,
            horizon.ok_or_else(|| missing("horizon"))?,
            deltas,
            epsilon,
            RngStream::new(seed.ok_or_else(|| missing("seed"))?, stream.ok_or_else(|| missing("stream"))?),
        )
    }
}

/// Unsorted points of coordinate `n` with magnitudes `>= delta`.
///
/// Draw order: count, then `(time, magnitude, sign)` per point.
pub(crate) fn draw_coordinate_points(
    n: usize,
    measure: &LevyMeasure,
    delta: f64,
    horizon: f64,
    stream: RngStream,
    out: &mut Vec<JumpPoint>,
) -> Result<()> {
    let tail = measure.tail_mass(delta)?;
    if !(tail > 0.0) {
        return Ok(());
    }
    let sampler = measure.sampler(delta)?;
    let mut rng = stream.rng();
    let count = rng::poisson(&mut rng, horizon * 2.0 * tail);
    out.reserve(count as usize);
    for _ in 0..count {
        let time = horizon * rng.random::<f64>();
        let q = 1.0 - rng.random::<f64>();
        let magnitude = sampler.draw(q)?;
        let sign = rng::rademacher(&mut rng);
        out.push(JumpPoint {
            coord: n,
            time,
            magnitude,
            sign,
        });
    }
    Ok(())
}

/// The point count [`draw_coordinate_points`] draws first from `stream`,
/// without the points themselves.
pub(crate) fn poisson_count(stream: RngStream, mean: f64) -> u64 {
    rng::poisson(&mut stream.rng(), mean)
}

/// Jumps of coordinate `n` with magnitude at least `delta` over `[0, horizon]`.
pub fn sample_coordinate_jumps(
    n: usize,
    measure: &LevyMeasure,
    delta: f64,
    horizon: f64,
    stream: RngStream,
) -> Result<JumpField> {
    if !(delta > 0.0) || !(horizon > 0.0) {
        return Err(domain("delta and horizon must be positive"));
    }
    let mut points = Vec::new();
    draw_coordinate_points(n, measure, delta, horizon, stream, &mut points)?;
    sort_points(&mut points);
    JumpField::new(points, horizon, vec![(n, delta)], None, stream)
}

/// Coordinate fields truncated in projected magnitude: coordinate `n`
/// keeps jumps with `b_n·y >= level`, i.e. raw magnitude `>= level / b_n`.
/// Coordinates with `b_n = 0` contribute nothing.
pub(crate) fn projected_field(
    model: &DiagonalModel,
    level: f64,
    n_max: usize,
    stream: RngStream,
    split_epsilon: Option<f64>,
) -> Result<JumpField> {
    let n_eff = model.effective_n_max(n_max);
    let mut points = Vec::new();
    let mut deltas = Vec::new();
    for n in 1..=n_eff {
        let b = model.b(n);
        if b <= 0.0 {
            continue;
        }
        let d = level / b;
        deltas.push((n, d));
        draw_coordinate_points(n, model.measure(n)?, d, model.horizon, stream.coordinate(n as u64), &mut points)?;
    }
    sort_points(&mut points);
    JumpField::new(points, model.horizon, deltas, split_epsilon, stream)
}

/// Time-sorted points of coordinate `n` with `b_n·y >= level`; empty when `b_n = 0`.
pub(crate) fn coordinate_points(model: &DiagonalModel, level: f64, n: usize, stream: RngStream) -> Result<Vec<JumpPoint>> {
    let b = model.b(n);
    let mut points = Vec::new();
    if b > 0.0 {
        draw_coordinate_points(n, model.measure(n)?, level / b, model.horizon, stream.coordinate(n as u64), &mut points)?;
        sort_points(&mut points);
    }
    Ok(points)
}

/// Jumps with `b_n·y >= ε` across coordinates `1..=n_max`.
pub fn sample_large_jump_field(model: &DiagonalModel, epsilon: f64, n_max: usize, stream: RngStream) -> Result<JumpField> {
    if !(epsilon > 0.0) {
        return Err(domain("epsilon must be positive"));
    }
    let n_eff = model.effective_n_max(n_max);
    if !(1..=n_eff).any(|n| model.b(n) > 0.0) {
        return Err(domain("no coordinate with b_n > 0 below n_max"));
    }
    projected_field(model, epsilon, n_max, stream, Some(epsilon))
}

/// Per-coordinate probability that some jump satisfies `b_n·y >= ε`,
/// `1 - exp(-2·a·ν_n([ε/b_n, ∞)))`.
pub fn large_jump_probability(model: &DiagonalModel, epsilon: f64, n: usize) -> Result<f64> {
    let b = model.b(n);
    if b <= 0.0 {
        return Ok(0.0);
    }
    let tail = model.measure(n)?.tail_mass(epsilon / b)?;
    Ok(-(-2.0 * model.horizon * tail).exp_m1())
}

/// `Σ_{n≤n_max} (1 - exp(-2ν_n([ε/b_n, ∞))))`, the expected number of
/// coordinates carrying a jump with `b_n·y >= ε` (horizon 1; the horizon
/// multiplies the tail in general).
pub fn expected_large_jump_count(model: &DiagonalModel, epsilon: f64, n_max: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(domain("epsilon must be positive"));
    }
    let n_eff = model.effective_n_max(n_max);
    let terms = (1..=n_eff)
        .map(|n| large_jump_probability(model, epsilon, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::stats::pairwise_sum(&terms))
}
