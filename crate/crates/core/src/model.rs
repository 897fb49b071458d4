//! The diagonal model: coefficient sequences `γ_n`, `σ_n`, `z_n = ⟨z, e_n⟩`,
//! the per-coordinate Lévy measures and the time horizon.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::measure::LevyMeasure;

/// A real sequence indexed from `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sequence {
    /// `coef · n^exponent`
    Power { coef: f64, exponent: f64 },
    /// `coef · ratio^n`
    Geometric { coef: f64, ratio: f64 },
    /// Explicit values for `n = 1..=len`; zero beyond.
    Table(Vec<f64>),
}

impl Sequence {
    pub fn power(coef: f64, exponent: f64) -> Self {
        Sequence::Power { coef, exponent }
    }

    pub fn value(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self {
            Sequence::Power { coef, exponent } => coef * (n as f64).powf(*exponent),
            Sequence::Geometric { coef, ratio } => coef * ratio.powi(n as i32),
            Sequence::Table(v) => v.get(n - 1).copied().unwrap_or(0.0),
        }
    }

    /// Number of explicitly stored values for tables.
    pub fn table_len(&self) -> Option<usize> {
        match self {
            Sequence::Table(v) => Some(v.len()),
            _ => None,
        }
    }

    pub fn asymptotic(&self) -> Asymptotic {
        match *self {
            Sequence::Power { coef, .. } | Sequence::Geometric { coef, .. } if coef == 0.0 => Asymptotic::Eventually0,
            Sequence::Power { exponent, .. } => Asymptotic::Rate { rho: 1.0, exp: exponent },
            Sequence::Geometric { ratio: 0.0, .. } => Asymptotic::Eventually0,
            Sequence::Geometric { ratio, .. } => Asymptotic::Rate {
                rho: ratio.abs(),
                exp: 0.0,
            },
            Sequence::Table(_) => Asymptotic::Eventually0,
        }
    }

    fn is_finite_params(&self) -> bool {
        match self {
            Sequence::Power { coef, exponent } => coef.is_finite() && exponent.is_finite(),
            Sequence::Geometric { coef, ratio } => coef.is_finite() && ratio.is_finite(),
            Sequence::Table(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// Growth class of `|a_n|`: either eventually zero or `≍ ρ^n · n^exp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptotic {
    Eventually0,
    Rate { rho: f64, exp: f64 },
}

impl Asymptotic {
    pub fn times(self, other: Asymptotic) -> Asymptotic {
        match (self, other) {
            (Asymptotic::Rate { rho: r1, exp: e1 }, Asymptotic::Rate { rho: r2, exp: e2 }) => Asymptotic::Rate {
                rho: r1 * r2,
                exp: e1 + e2,
            },
            _ => Asymptotic::Eventually0,
        }
    }

    pub fn powf(self, k: f64) -> Asymptotic {
        match self {
            Asymptotic::Rate { rho, exp } => Asymptotic::Rate {
                rho: rho.powf(k),
                exp: exp * k,
            },
            z => z,
        }
    }

    /// Class of `1 / (1 + a_n)` for a positive sequence `a_n`.
    pub fn one_plus_recip(self) -> Asymptotic {
        match self {
            Asymptotic::Rate { rho, exp } if rho > 1.0 || (rho == 1.0 && exp > 0.0) => Asymptotic::Rate {
                rho: 1.0 / rho,
                exp: -exp,
            },
            _ => Asymptotic::Rate { rho: 1.0, exp: 0.0 },
        }
    }

    /// Effective p-series exponent `r` with terms `≍ n^{-r}`: `+inf` for
    /// geometric decay or eventually-zero terms, `-inf` for geometric growth.
    pub fn series_exponent(self) -> f64 {
        match self {
            Asymptotic::Eventually0 => f64::INFINITY,
            Asymptotic::Rate { rho, .. } if rho < 1.0 => f64::INFINITY,
            Asymptotic::Rate { rho, .. } if rho > 1.0 => f64::NEG_INFINITY,
            Asymptotic::Rate { exp, .. } => -exp,
        }
    }
}

/// Lévy measures attached to the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    Common(LevyMeasure),
    PerCoordinate(Vec<LevyMeasure>),
}

/// Diagonal model `dX^(n) = -γ_n X^(n) dt + σ_n dL^(n)` projected on `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalModel {
    pub gamma: Sequence,
    pub sigma: Sequence,
    pub z: Sequence,
    pub measures: MeasureFamily,
    pub horizon: f64,
}

impl DiagonalModel {
    pub fn new(gamma: Sequence, sigma: Sequence, z: Sequence, measures: MeasureFamily, horizon: f64) -> Result<Self> {
        let model = Self {
            gamma,
            sigma,
            z,
            measures,
            horizon,
        };
        model.validate()?;
        Ok(model)
    }

    /// Stable model with power-law coefficients
    /// `γ_n = g·n^q`, `σ_n = n^{-p}`, `z_n = n^{-r}`.
    pub fn stable_power(alpha: f64, g: f64, q: f64, p: f64, r: f64) -> Result<Self> {
        Self::new(
            Sequence::power(g, q),
            Sequence::power(1.0, -p),
            Sequence::power(1.0, -r),
            MeasureFamily::Common(LevyMeasure::stable(alpha)?),
            1.0,
        )
    }

    /// One coordinate with `b_1 = b`, `γ_1 = gamma`.
    pub fn single(measure: LevyMeasure, b: f64, gamma: f64) -> Result<Self> {
        Self::new(
            Sequence::Table(vec![gamma]),
            Sequence::Table(vec![b]),
            Sequence::Table(vec![1.0]),
            MeasureFamily::Common(measure),
            1.0,
        )
    }

    /// Model specified directly through `b_n`. A power law `b_n = c·n^e` is
    /// realized as `σ_n = c·n^{e+1}`, `z_n = n^{-1}`; a table as `σ_n = b_n`,
    /// `z_n = 1`.
    pub fn with_b(measure: LevyMeasure, b: Sequence, gamma: Sequence) -> Result<Self> {
        let (sigma, z) = match b {
            Sequence::Power { coef, exponent } => (Sequence::power(coef.abs(), exponent + 1.0), Sequence::power(1.0, -1.0)),
            Sequence::Table(v) => {
                let ones = vec![1.0; v.len()];
                (Sequence::Table(v.iter().map(|x| x.abs()).collect()), Sequence::Table(ones))
            }
            Sequence::Geometric { coef, ratio } => (
                Sequence::Geometric {
                    coef: coef.abs(),
                    ratio: ratio.abs().sqrt(),
                },
                Sequence::Geometric {
                    coef: 1.0,
                    ratio: ratio.abs().sqrt(),
                },
            ),
        };
        Self::new(gamma, sigma, z, MeasureFamily::Common(measure), 1.0)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(domain(format!("horizon {} must be positive", self.horizon)));
        }
        for (name, s) in [("gamma", &self.gamma), ("sigma", &self.sigma), ("z", &self.z)] {
            if !s.is_finite_params() {
                return Err(domain(format!("{name} has non-finite parameters")));
            }
        }
        match &self.gamma {
            Sequence::Power { coef, .. } if *coef <= 0.0 => return Err(domain("gamma coefficient must be positive")),
            Sequence::Geometric { coef, ratio } if *coef <= 0.0 || *ratio <= 0.0 => {
                return Err(domain("gamma must be positive"))
            }
            Sequence::Table(v) if v.iter().any(|&g| g <= 0.0) => return Err(domain("gamma must be positive")),
            _ => {}
        }
        match &self.sigma {
            Sequence::Power { coef, .. } if *coef < 0.0 => return Err(domain("sigma must be nonnegative")),
            Sequence::Geometric { coef, ratio } if *coef < 0.0 || *ratio < 0.0 => {
                return Err(domain("sigma must be nonnegative"))
            }
            Sequence::Table(v) if v.iter().any(|&s| s < 0.0) => return Err(domain("sigma must be nonnegative")),
            _ => {}
        }
        // z must be square-summable when given parametrically
        match &self.z {
            Sequence::Power { coef, exponent } if *coef != 0.0 && *exponent >= -0.5 && self.sigma.table_len().is_none() => {
                return Err(domain(format!(
                    "z_n = c·n^{exponent} is not square-summable (decay exponent must exceed 1/2)"
                )))
            }
            Sequence::Geometric { coef, ratio } if *coef != 0.0 && ratio.abs() >= 1.0 => {
                return Err(domain("geometric z must have |ratio| < 1"))
            }
            _ => {}
        }
        if let Some(dim) = self.dimension() {
            if let Some(glen) = self.gamma.table_len() {
                if glen < dim {
                    return Err(domain(format!("gamma table has {glen} entries, model has {dim} coordinates")));
                }
            }
            if let MeasureFamily::PerCoordinate(v) = &self.measures {
                if v.len() < dim {
                    return Err(domain(format!("{} measures for {dim} coordinates", v.len())));
                }
            }
        } else if self.gamma.table_len().is_some() {
            return Err(domain("gamma table requires a finite model (tabulated sigma or z)"));
        } else if let MeasureFamily::PerCoordinate(_) = &self.measures {
            return Err(domain("per-coordinate measures require a finite model"));
        }
        Ok(())
    }

    /// Number of coordinates for finite (tabulated) models.
    pub fn dimension(&self) -> Option<usize> {
        match (self.sigma.table_len(), self.z.table_len()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        }
    }

    /// Coordinates actually simulated when asked for `n_max`.
    pub fn effective_n_max(&self, n_max: usize) -> usize {
        self.dimension().map_or(n_max, |d| d.min(n_max))
    }

    pub fn gamma(&self, n: usize) -> f64 {
        self.gamma.value(n)
    }

    pub fn sigma(&self, n: usize) -> f64 {
        self.sigma.value(n)
    }

    /// `b_n = |σ_n ⟨z, e_n⟩|`.
    pub fn b(&self, n: usize) -> f64 {
        (self.sigma.value(n) * self.z.value(n)).abs()
    }

    /// `sgn ⟨z, e_n⟩` as -1, 0 or +1.
    pub fn sign_z(&self, n: usize) -> i8 {
        let z = self.z.value(n);
        if z > 0.0 {
            1
        } else if z < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn measure(&self, n: usize) -> Result<&LevyMeasure> {
        match &self.measures {
            MeasureFamily::Common(m) => Ok(m),
            MeasureFamily::PerCoordinate(v) => v
                .get(n - 1)
                .ok_or_else(|| Error::Domain(format!("no measure for coordinate {n}"))),
        }
    }

    /// Common stability index, if every coordinate carries the same stable measure.
    pub fn stable_alpha(&self) -> Option<f64> {
        match &self.measures {
            MeasureFamily::Common(m) => m.alpha(),
            MeasureFamily::PerCoordinate(v) => {
                let a = v.first()?.alpha()?;
                v.iter().all(|m| m.alpha() == Some(a)).then_some(a)
            }
        }
    }

    /// Growth class of `b_n`.
    pub fn b_asymptotic(&self) -> Asymptotic {
        if self.dimension().is_some() {
            return Asymptotic::Eventually0;
        }
        self.sigma.asymptotic().times(self.z.asymptotic())
    }

    pub fn sigma_asymptotic(&self) -> Asymptotic {
        self.sigma.asymptotic()
    }

    pub fn gamma_asymptotic(&self) -> Asymptotic {
        match &self.gamma {
            Sequence::Table(_) => Asymptotic::Rate { rho: 1.0, exp: 0.0 },
            s => s.asymptotic(),
        }
    }

    /// Short content hash used to tag outputs.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
