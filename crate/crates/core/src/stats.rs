//! Statistics used by the verification checks: order-stable reductions,
//! Kolmogorov–Smirnov tests, empirical characteristic functions and a
//! distance-correlation permutation test.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::rng::RngStream;

/// Pairwise (cascade) summation; the result depends only on element order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let v = sorted(xs);
    quantile_sorted(&v, q)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn interquartile_range(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= λ) = sqrt(2π)/λ Σ exp(-(2k-1)² π² / (8λ²))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS statistic against a reference CDF, with asymptotic p-value.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], reference_cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(contract("KS test needs at least one sample"));
    }
    let v = sorted(samples);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = reference_cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample KS statistic with asymptotic p-value.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(contract("two-sample KS test needs nonempty samples"));
    }
    let (x, y) = (sorted(a), sorted(b));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
    })
}

/// Empirical characteristic function at one frequency against a real target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcfPoint {
    pub theta: f64,
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
    pub target: f64,
}

impl EcfPoint {
    pub fn compute(samples: &[f64], theta: f64, target: f64) -> Self {
        let cos: Vec<f64> = samples.iter().map(|x| (theta * x).cos()).collect();
        let sin: Vec<f64> = samples.iter().map(|x| (theta * x).sin()).collect();
        Self {
            theta,
            re: mean(&cos),
            im: mean(&sin),
            se_re: std_err(&cos),
            se_im: std_err(&sin),
            target,
        }
    }

    /// Both parts within `k` standard errors of `(target, 0)`.
    /// A degenerate band (zero standard error) demands exact agreement.
    pub fn within(&self, k: f64) -> bool {
        (self.re - self.target).abs() <= k * self.se_re + 1e-12 && self.im.abs() <= k * self.se_im + 1e-12
    }

    pub fn z_score(&self) -> f64 {
        if self.se_re > 0.0 {
            (self.re - self.target) / self.se_re
        } else {
            0.0
        }
    }
}

/// Ranks scaled to (0, 1); ties broken by position.
pub fn rank_transform(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let n = xs.len() as f64;
    let mut r = vec![0.0; xs.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = (rank as f64 + 0.5) / n;
    }
    r
}

fn centered_distances(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (x[i] - x[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n).map(|i| mean(&d[i * n..(i + 1) * n])).collect();
    let grand = mean(&row);
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] += grand - row[i] - row[j];
        }
    }
    d
}

fn dcov2(a: &[f64], b: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut acc = 0.0;
    for i in 0..n {
        let pi = perm[i];
        for j in 0..n {
            acc += a[i * n + j] * b[pi * n + perm[j]];
        }
    }
    acc / (n * n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorResult {
    pub dcor: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Distance-correlation test of independence with a permutation p-value.
pub fn dcor_permutation_test(x: &[f64], y: &[f64], permutations: usize, stream: RngStream) -> Result<DcorResult> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(contract("distance correlation needs paired samples of size >= 4"));
    }
    let n = x.len();
    let a = centered_distances(x);
    let b = centered_distances(y);
    let ident: Vec<usize> = (0..n).collect();
    let observed = dcov2(&a, &b, &ident);
    let vx = dcov2(&a, &a, &ident);
    let vy = dcov2(&b, &b, &ident);
    let dcor = if vx > 0.0 && vy > 0.0 {
        (observed / (vx * vy).sqrt()).max(0.0).sqrt()
    } else {
        0.0
    };
    let mut rng = stream.rng();
    let mut perm = ident.clone();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        if dcov2(&a, &b, &perm) >= observed {
            exceed += 1;
        }
    }
    Ok(DcorResult {
        dcor,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
    })
}
