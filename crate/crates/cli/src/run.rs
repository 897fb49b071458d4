use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use levy_ou::criteria::classify_at;
use levy_ou::ou::{PathPlan, PathSample, TimeGrid};
use levy_ou::par::{try_map_indexed, Execution};
use levy_ou::rng::RngStream;
use levy_ou::stable_integral::{
    integral_refinement_check, levy_suite, scale_parameter, IntegralOptions, IntegralPlan, KernelRegistry, SmallPointMode,
    ValidatedKernel,
};
use levy_ou::stats::{interquartile_range, mean, quantile, variance};
use levy_ou::verify::{
    calibrate, large_jump_count_check, marginal_law_check, max_jump_cdf_check, sup_bound_check, SupBoundOptions, C_CAL,
};

use crate::config::{ExperimentConfig, SimulateMode};
use crate::error::CliError;
use crate::output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Criteria,
    VerifyJumps,
    VerifySupbound,
    VerifyMarginal,
    StableIntegral,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Criteria => "criteria",
            Command::VerifyJumps => "verify-jumps",
            Command::VerifySupbound => "verify-supbound",
            Command::VerifyMarginal => "verify-marginal",
            Command::StableIntegral => "stable-integral",
            Command::Calibrate => "calibrate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Command::Simulate,
            Command::Criteria,
            Command::VerifyJumps,
            Command::VerifySupbound,
            Command::VerifyMarginal,
            Command::StableIntegral,
            Command::Calibrate,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub exec: Execution,
}

impl Context {
    fn root(&self) -> RngStream {
        RngStream::root(self.cfg.seed)
    }

    fn model(&self) -> Result<levy_ou::model::DiagonalModel, CliError> {
        self.cfg.section("model", &self.cfg.model)?.build(&self.base)
    }
}

/// Runs one command; `Ok(false)` means a verification check failed.
pub fn run(cmd: Command, ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    match cmd {
        Command::Simulate => simulate(ctx, out),
        Command::Criteria => criteria(ctx, out),
        Command::VerifyJumps => verify_jumps(ctx, out),
        Command::VerifySupbound => verify_supbound(ctx, out),
        Command::VerifyMarginal => verify_marginal(ctx, out),
        Command::StableIntegral => stable_integral(ctx, out),
        Command::Calibrate => calibrate_cmd(ctx, out),
    }
}

fn column_summary(grid: &[f64], columns: &[Vec<f64>]) -> String {
    let mut s = String::from("time mean sd q05 median q95 iqr\n");
    for (i, t) in grid.iter().enumerate() {
        let c = &columns[i];
        let _ = writeln!(
            s,
            "{t:e} {:e} {:e} {:e} {:e} {:e} {:e}",
            mean(c),
            variance(c).sqrt(),
            quantile(c, 0.05),
            quantile(c, 0.5),
            quantile(c, 0.95),
            interquartile_range(c)
        );
    }
    s
}

fn transpose(paths: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    (0..len).map(|i| paths.iter().map(|p| p[i]).collect()).collect()
}

fn path_rows(s: &mut String, r: usize, p: &PathSample) {
    for i in 0..p.grid.len() {
        let _ = write!(s, "{r} {:e} {:e}", p.grid[i], p.values[i]);
        if let Some(c) = &p.components {
            let _ = write!(s, " {:e} {:e} {:e}", c.large[i], c.martingale[i], c.remainder[i]);
        }
        s.push('\n');
    }
}

fn simulate(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let sim = ctx.cfg.section("simulate", &ctx.cfg.simulate)?;
    sim.validate()?;
    let model = ctx.model()?;
    let grid = TimeGrid::uniform(model.horizon, sim.grid_points)?;
    let plan = match sim.mode {
        SimulateMode::Project => PathPlan::project(&model, sim.delta, sim.n_max, grid)?,
        SimulateMode::Split => PathPlan::split(&model, sim.epsilon.unwrap_or(1.0), sim.delta, sim.n_max, grid)?,
    };
    let root = ctx.root();
    let paths = try_map_indexed(sim.reps, ctx.exec, |r| plan.sample(root.replicate(r as u64)))?;
    let first = &paths[0];
    let m = &first.meta;
    let mut head = String::new();
    let _ = writeln!(head, "# model_hash: {}", m.model_hash);
    let _ = writeln!(head, "# seed: {}", m.stream.seed);
    let _ = writeln!(head, "# delta: {:e}", m.delta);
    let _ = writeln!(head, "# epsilon: {}", m.epsilon.map_or("none".into(), |e| format!("{e:e}")));
    let _ = writeln!(head, "# coordinates: {}..={}", m.n_from, m.n_max);
    let _ = writeln!(head, "# small_jump_l2: {:e}", m.bounds.small_jump_l2);
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:e}"));
    let _ = writeln!(head, "# omitted_l2: {}", opt(m.bounds.omitted_l2));
    let _ = writeln!(head, "# omitted_jump_rate: {}", opt(m.bounds.omitted_jump_rate));

    let export = sim.export.unwrap_or(100).min(sim.reps);
    let mut body = head.clone();
    body.push_str(if first.components.is_some() {
        "replicate time value large martingale remainder\n"
    } else {
        "replicate time value\n"
    });
    for (r, p) in paths.iter().take(export).enumerate() {
        path_rows(&mut body, r, p);
    }
    out.write("paths.txt", &body)?;

    let values: Vec<Vec<f64>> = paths.iter().map(|p| p.values.clone()).collect();
    let mut summary = head;
    let _ = writeln!(summary, "# replicates: {}", sim.reps);
    if first.components.is_some() {
        let worst = paths
            .iter()
            .map(|p| p.split_identity_error() / p.split_identity_scale().max(1.0))
            .fold(0.0, f64::max);
        let _ = writeln!(summary, "# split_identity_relative_error: {worst:e}");
    }
    summary.push_str(&column_summary(&first.grid, &transpose(&values, first.grid.len())));
    out.write("summary.txt", &summary)?;
    Ok(true)
}

fn criteria(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let c = ctx.cfg.criteria.clone().unwrap_or(crate::config::CriteriaConfig { epsilon: 1.0 });
    c.validate()?;
    let report = classify_at(&ctx.model()?, c.epsilon)?;
    out.write("criteria.txt", &report.to_text())?;
    Ok(true)
}

fn verify_jumps(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let v = ctx.cfg.section("verify_jumps", &ctx.cfg.verify_jumps)?;
    v.validate()?;
    let model = ctx.model()?;
    let root = ctx.root();
    let max = max_jump_cdf_check(model.measure(1)?, v.b, &v.u_grid, v.reps, root.child(1), ctx.exec)?;
    let count = large_jump_count_check(&model, v.epsilon, &v.n_grid, v.reps, root.child(2), ctx.exec)?;
    let a = out.report("jumps_max", &max)?;
    let b = out.report("jumps_count", &count)?;
    Ok(a && b)
}

fn verify_supbound(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let v = ctx.cfg.section("verify_supbound", &ctx.cfg.verify_supbound)?;
    v.validate()?;
    let model = ctx.model()?;
    let opts = SupBoundOptions { c_cal: v.c_cal(), u_grid: v.u_grid.clone(), exec: ctx.exec };
    let mut ok = true;
    for (i, [k, m]) in v.windows.iter().enumerate() {
        let rep = sup_bound_check(&model, v.epsilon, *k, *m, v.reps, ctx.root().child(i as u64), &opts)?;
        ok &= out.report(&format!("supbound_k{k}_m{m}"), &rep)?;
    }
    Ok(ok)
}

fn verify_marginal(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let v = ctx.cfg.section("verify_marginal", &ctx.cfg.verify_marginal)?;
    v.validate()?;
    let mut ok = true;
    for (i, &alpha) in v.alphas.iter().enumerate() {
        let rep = marginal_law_check(alpha, v.t, v.delta, v.mode, v.reps, ctx.root().child(i as u64), ctx.exec)?;
        ok &= out.report(&format!("marginal_alpha{alpha}"), &rep)?;
    }
    Ok(ok)
}

fn stable_integral(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let s = ctx.cfg.section("stable_integral", &ctx.cfg.stable_integral)?;
    s.validate()?;
    let space = s.space()?;
    let kernel = KernelRegistry::with_builtins().build(&s.kernel, &s.params, s.horizon)?;
    let vk = ValidatedKernel::new(&kernel, &space)?;
    let grid: Vec<f64> = (0..s.grid_points).map(|i| s.horizon * i as f64 / (s.grid_points - 1) as f64).collect();
    let options = IntegralOptions {
        subdomain: s.subdomain(),
        small_points: s.small_points.unwrap_or(SmallPointMode::Drop),
        ..Default::default()
    };
    let plan = IntegralPlan::new(&vk, s.delta, grid.clone(), options)?;
    let root = ctx.root();
    let paths = try_map_indexed(s.reps, ctx.exec, |r| plan.sample(root.replicate(r as u64)))?;

    let rep = vk.report();
    let mut k = String::new();
    let _ = writeln!(k, "kernel: {}", rep.name);
    let _ = writeln!(k, "alpha: {}", space.alpha());
    let _ = writeln!(k, "c_alpha: {:e}", space.c_alpha());
    let _ = writeln!(k, "horizon: {}", rep.horizon);
    let _ = writeln!(k, "validation_grid: {} x {}", rep.t_points, rep.x_points);
    let _ = writeln!(k, "f1_alpha_integral: {:e}", rep.f1_alpha_integral);
    let _ = writeln!(k, "f2_alpha_integral: {:e}", rep.f2_alpha_integral);
    let _ = writeln!(k, "variation_alpha_integral: {:e}", rep.variation_alpha_integral);
    let _ = writeln!(k, "variation_norm: {:e}", rep.variation_norm);
    let _ = writeln!(k, "large_point_rate: {:e}", rep.large_point_rate);
    let _ = writeln!(k, "truncation_bound: {:e}", plan.truncation_bound());
    out.write("integral_kernel.txt", &k)?;

    let export = s.export.unwrap_or(100).min(s.reps);
    let mut body = String::new();
    let m = &paths[0].meta;
    let _ = writeln!(body, "# delta: {:e}", m.delta);
    let _ = writeln!(body, "# subdomain: [{}, {}]", m.subdomain.lo, m.subdomain.hi);
    let _ = writeln!(body, "# small_points: {:?}", m.small_points);
    let _ = writeln!(body, "# truncation_bound: {:e}", m.truncation_bound);
    body.push_str("replicate time value\n");
    for (r, p) in paths.iter().take(export).enumerate() {
        for (t, v) in p.grid.iter().zip(&p.values) {
            let _ = writeln!(body, "{r} {t:e} {v:e}");
        }
    }
    out.write("integral_paths.txt", &body)?;

    let values: Vec<Vec<f64>> = paths.iter().map(|p| p.values.clone()).collect();
    let cols = transpose(&values, grid.len());
    let mut summary = String::from("time median iqr scale_parameter\n");
    for (i, t) in grid.iter().enumerate() {
        let _ = writeln!(
            summary,
            "{t:e} {:e} {:e} {:e}",
            quantile(&cols[i], 0.5),
            interquartile_range(&cols[i]),
            scale_parameter(&vk, *t)?
        );
    }
    out.write("integral_summary.txt", &summary)?;

    let mut ok = true;
    if s.levy_suite {
        ok &= out.report("levy_suite", &levy_suite(space.alpha(), s.reps, root.child(3), ctx.exec)?)?;
    }
    if let Some(reps) = s.refinement_reps {
        let r = integral_refinement_check(&vk, s.delta, reps, root.child(4), C_CAL, ctx.exec)?;
        ok &= out.report("integral_refinement", &r)?;
    }
    Ok(ok)
}

fn calibrate_cmd(ctx: &Context, out: &mut Output) -> Result<bool, CliError> {
    let c = ctx.cfg.calibrate.clone().unwrap_or(crate::config::CalibrateConfig {
        reps: levy_ou::verify::CALIBRATION_REPS,
    });
    c.validate()?;
    let cal = calibrate(c.reps, ctx.root(), ctx.exec)?;
    let mut s = String::from("case ratio\n");
    for (label, r) in &cal.ratios {
        let _ = writeln!(s, "{label} {r:e}");
    }
    let _ = writeln!(s, "# max_ratio: {:e}", cal.max_ratio);
    let _ = writeln!(s, "# c_cal: {:e}", cal.c_cal);
    let _ = writeln!(s, "# frozen_c_cal: {C_CAL}");
    out.write("calibration.txt", &s)?;
    Ok(true)
}

/// Output directory: flag, then config, then `LEVYOU_OUT`, then `levy-ou-out`.
pub fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("LEVYOU_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("levy-ou-out"))
}
