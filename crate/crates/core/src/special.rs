//! Special functions used for closed-form series tails.

/// Bernoulli numbers B_2, B_4, ..., B_14.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (a + k)^{-s}` for `s > 1`, `a > 0`.
///
/// Returns `+inf` for `s <= 1`. Euler–Maclaurin with ten explicit terms.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    if !(s > 1.0) {
        return f64::INFINITY;
    }
    if s.is_infinite() {
        return if a < 1.0 {
            f64::INFINITY
        } else if a == 1.0 {
            1.0
        } else {
            0.0
        };
    }
    const M: usize = 10;
    let mut head = 0.0;
    for k in 0..M {
        head += (a + k as f64).powf(-s);
    }
    let x = a + M as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising product s(s+1)...(s+2j-2) / (2j)!
    let mut coef = s;
    let mut fact = 2.0;
    let mut xp = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * coef * xp;
        tail += term;
        let j2 = 2.0 * (j as f64 + 1.0);
        coef *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        xp /= x * x;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Sum `Σ_{n=from}^{to} n^{-s}`; `to = None` means to infinity.
pub fn power_sum(s: f64, from: usize, to: Option<usize>) -> f64 {
    match to {
        Some(to) if to < from => 0.0,
        Some(to) if to - from < 2_000 => (from..=to).map(|n| (n as f64).powf(-s)).sum(),
        Some(to) if s > 1.0 => hurwitz_zeta(s, from as f64) - hurwitz_zeta(s, to as f64 + 1.0),
        Some(to) => (from..=to).map(|n| (n as f64).powf(-s)).sum(),
        None => hurwitz_zeta(s, from as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn known_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
    }

    #[test]
    fn shift_relation() {
        for &s in &[1.1, 1.8, 3.0] {
            for &a in &[1.0, 3.5, 1000.0] {
                let lhs = hurwitz_zeta(s, a) - hurwitz_zeta(s, a + 1.0);
                let rhs = a.powf(-s);
                assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1e-300) + 1e-15, "s={s} a={a}");
            }
        }
    }

    #[test]
    fn partial_sums_agree_with_brute_force() {
        let brute: f64 = (5..=50_000).map(|n| (n as f64).powf(-1.3)).sum();
        assert!((power_sum(1.3, 5, Some(50_000)) - brute).abs() < 1e-10);
        assert!(power_sum(0.9, 1, None).is_infinite());
    }
}
