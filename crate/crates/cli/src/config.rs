//! Experiment configuration: one TOML file per run, with dotted overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use levy_ou::measure::{LevyMeasure, TabulatedMeasure};
use levy_ou::model::{DiagonalModel, MeasureFamily, Sequence};
use levy_ou::stable_integral::{SmallPointMode, StableMeasureSpace, Subdomain};
use levy_ou::verify::{MarginalMode, C_CAL, CALIBRATION_REPS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_jumps: Option<VerifyJumpsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_supbound: Option<VerifySupboundConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_marginal: Option<VerifyMarginalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable_integral: Option<StableIntegralConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateConfig>,
}

fn one() -> f64 {
    1.0
}

fn grid_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Stable index; exclusive with `measure_table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Tabulated measure file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_table: Option<PathBuf>,
    pub gamma: Sequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Sequence>,
    /// `b_n = σ_n·z_n` directly; exclusive with `sigma` and `z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Sequence>,
    #[serde(default = "one")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulateMode {
    Project,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub mode: SimulateMode,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub n_max: usize,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    pub reps: usize,
    /// Number of replicates written out path by path; all enter the summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaConfig {
    #[serde(default = "one")]
    pub epsilon: f64,
}

fn default_u_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

fn default_n_grid() -> Vec<usize> {
    vec![100, 1000, 10_000]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyJumpsConfig {
    pub reps: usize,
    /// Coefficient of the maximal-jump check.
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "default_u_grid")]
    pub u_grid: Vec<f64>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySupboundConfig {
    pub reps: usize,
    #[serde(default = "one")]
    pub epsilon: f64,
    /// Coordinate windows `[k, m]`.
    pub windows: Vec<[usize; 2]>,
    #[serde(default)]
    pub u_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_cal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyMarginalConfig {
    pub alphas: Vec<f64>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<MarginalMode>,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform,
    /// `w(x) = |x|^exponent`.
    Power { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        lo: f64,
        hi: f64,
        #[serde(default = "uniform")]
        density: DensityConfig,
    },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

fn uniform() -> DensityConfig {
    DensityConfig::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableIntegralConfig {
    pub alpha: f64,
    pub domain: DomainConfig,
    pub kernel: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_points: Option<SmallPointMode>,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<usize>,
    /// Run the Lévy-process suite (indicator kernel on uniform `[0, 1]`).
    #[serde(default)]
    pub levy_suite: bool,
    /// Refinement check at `delta` with this many replicates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_reps: Option<usize>,
}

fn calibration_reps() -> usize {
    CALIBRATION_REPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default = "calibration_reps")]
    pub reps: usize,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(key, format!("must be at least {min}, got {v}")))
    }
}

fn stable_index(key: &str, a: f64) -> Result<(), CliError> {
    if a > 0.0 && a < 2.0 {
        Ok(())
    } else {
        Err(bad(key, format!("must lie in (0, 2), got {a}")))
    }
}

/// Parses a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value` to the table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(bad("schema", format!("expected {SCHEMA}, got {}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML without the output directory.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical`], hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn section<'a, T>(&self, name: &str, s: &'a Option<T>) -> Result<&'a T, CliError> {
        s.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
    }
}

impl ModelConfig {
    pub fn build(&self, base: &Path) -> Result<DiagonalModel, CliError> {
        positive("model.horizon", self.horizon)?;
        let measure = match (self.alpha, &self.measure_table) {
            (Some(a), None) => {
                stable_index("model.alpha", a)?;
                LevyMeasure::stable(a)?
            }
            (None, Some(p)) => LevyMeasure::custom(TabulatedMeasure::load(&base.join(p))?),
            _ => return Err(bad("model", "exactly one of alpha and measure_table is required")),
        };
        let model = match (&self.b, &self.sigma, &self.z) {
            (Some(b), None, None) => DiagonalModel::with_b(measure, b.clone(), self.gamma.clone())?,
            (None, Some(s), Some(z)) => DiagonalModel::new(
                self.gamma.clone(),
                s.clone(),
                z.clone(),
                MeasureFamily::Common(measure),
                1.0,
            )?,
            _ => return Err(bad("model", "give either b, or both sigma and z")),
        };
        Ok(model.with_horizon(self.horizon)?)
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("simulate.delta", self.delta)?;
        at_least("simulate.reps", self.reps, 1)?;
        at_least("simulate.n_max", self.n_max, 1)?;
        at_least("simulate.grid_points", self.grid_points, 2)?;
        match (self.mode, self.epsilon) {
            (SimulateMode::Split, Some(e)) => {
                positive("simulate.epsilon", e)?;
                if self.delta >= e {
                    return Err(bad("simulate.delta", "must be below epsilon"));
                }
            }
            (SimulateMode::Split, None) => return Err(bad("simulate.epsilon", "required in split mode")),
            (SimulateMode::Project, _) => {}
        }
        Ok(())
    }
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("criteria.epsilon", self.epsilon)
    }
}

impl VerifyJumpsConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        at_least("verify_jumps.reps", self.reps, 1)?;
        positive("verify_jumps.b", self.b)?;
        positive("verify_jumps.epsilon", self.epsilon)?;
        for u in &self.u_grid {
            positive("verify_jumps.u_grid", *u)?;
        }
        for n in &self.n_grid {
            at_least("verify_jumps.n_grid", *n, 1)?;
        }
        Ok(())
    }
}

impl VerifySupboundConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        at_least("verify_supbound.reps", self.reps, 1)?;
        positive("verify_supbound.epsilon", self.epsilon)?;
        if self.windows.is_empty() {
            return Err(bad("verify_supbound.windows", "at least one window required"));
        }
        for [k, m] in &self.windows {
            if *k == 0 || k > m {
                return Err(bad("verify_supbound.windows", format!("[{k}, {m}] needs 1 <= k <= m")));
            }
        }
        if let Some(c) = self.c_cal {
            positive("verify_supbound.c_cal", c)?;
        }
        Ok(())
    }

    pub fn c_cal(&self) -> f64 {
        self.c_cal.unwrap_or(C_CAL)
    }
}

impl VerifyMarginalConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.alphas.is_empty() {
            return Err(bad("verify_marginal.alphas", "at least one alpha required"));
        }
        for a in &self.alphas {
            stable_index("verify_marginal.alphas", *a)?;
        }
        positive("verify_marginal.t", self.t)?;
        if let Some(d) = self.delta {
            positive("verify_marginal.delta", d)?;
        }
        at_least("verify_marginal.reps", self.reps, 1)
    }
}

impl StableIntegralConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        stable_index("stable_integral.alpha", self.alpha)?;
        positive("stable_integral.delta", self.delta)?;
        positive("stable_integral.horizon", self.horizon)?;
        at_least("stable_integral.reps", self.reps, 1)?;
        at_least("stable_integral.grid_points", self.grid_points, 2)?;
        if let Some([lo, hi]) = self.subdomain {
            if !(lo <= hi) {
                return Err(bad("stable_integral.subdomain", format!("[{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<StableMeasureSpace, CliError> {
        Ok(match &self.domain {
            DomainConfig::Interval { lo, hi, density: DensityConfig::Uniform } => StableMeasureSpace::interval(*lo, *hi, self.alpha)?,
            DomainConfig::Interval { lo, hi, density: DensityConfig::Power { exponent } } => {
                let k = *exponent;
                StableMeasureSpace::interval_with_density(*lo, *hi, move |x: f64| x.abs().powf(k), self.alpha)?
            }
            DomainConfig::Discrete { points, weights } => StableMeasureSpace::discrete(points.clone(), weights.clone(), self.alpha)?,
        })
    }

    pub fn subdomain(&self) -> Option<Subdomain> {
        self.subdomain.map(|[lo, hi]| Subdomain { lo, hi })
    }
}

impl CalibrateConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        at_least("calibrate.reps", self.reps, 1000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "schema = 1\nseed = 7\n[criteria]\nepsilon = 1.0\n";

    #[test]
    fn overrides_are_typed() {
        let c = ExperimentConfig::parse(BASE, &["criteria.epsilon=0.5".into(), "seed=9".into()]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.criteria.unwrap().epsilon, 0.5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::parse(&format!("{BASE}bogus = 1\n"), &[]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert!(ExperimentConfig::parse(BASE, &["criteria.eps=1".into()]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::parse(BASE, &[]).unwrap();
        let b = ExperimentConfig::parse(BASE, &["output_dir=\"elsewhere\"".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(BASE, &["seed=8".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn canonical_round_trips() {
        let a = ExperimentConfig::parse(BASE, &[]).unwrap();
        let b = ExperimentConfig::parse(&a.canonical(), &[]).unwrap();
        assert_eq!(a, b);
    }
}
