//! Reproducible random streams.
//!
//! Every random quantity in the toolkit is drawn from a [`RngStream`], a
//! `(seed, stream)` pair that maps onto an independent ChaCha8 keystream.
//! Child streams for replicates and coordinates are derived with a fixed
//! mixing function, so results never depend on evaluation order or on how
//! work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// Provenance of a random draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b.wrapping_add(0x632B_E59B_D9B4_E019)))
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Root stream of an experiment.
    pub fn root(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Stream for replicate `r` below this one.
    pub fn replicate(&self, r: u64) -> Self {
        Self {
            seed: self.seed,
            stream: combine(self.stream ^ 0x5245_504C, r),
        }
    }

    /// Stream for coordinate `n` below this one.
    pub fn coordinate(&self, n: u64) -> Self {
        Self {
            seed: self.seed,
            stream: combine(self.stream ^ 0x434F_4F52, n),
        }
    }

    /// Named sub-stream, used to separate independent roles (signs, oracle
    /// samples, permutations) that hang off the same parent.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: combine(self.stream ^ 0x4348_4C44, tag),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[inline]
pub fn rademacher<R: RngCore + ?Sized>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Poisson-distributed count.
///
/// Sequential inversion below mean 10, Hörmann's transformed rejection
/// (PTRS) above. Both consume the stream deterministically.
pub fn poisson<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < 10.0 {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        let next = cdf + p;
        if next == cdf {
            break;
        }
        cdf = next;
    }
    k
}

fn poisson_ptrs<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// ln(k!) exact below 20, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        let mut acc = 0.0;
        for i in 2..=k {
            acc += (i as f64).ln();
        }
        return acc;
    }
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}
