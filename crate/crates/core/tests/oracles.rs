//! Library values against oracles computed here from first principles.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use approx::assert_relative_eq;
use levy_ou::field::{expected_large_jump_count, large_jump_probability, sample_coordinate_jumps};
use levy_ou::measure::{standardization_constant, LevyMeasure};
use levy_ou::model::{DiagonalModel, Sequence};
use levy_ou::psi::psi;
use levy_ou::rng::RngStream;
use levy_ou::series::{series_verdict, Verdict};
use levy_ou::stable_integral::{
    integral_path, scale_parameter, truncation_bound, KernelRegistry, StableMeasureSpace, ValidatedKernel,
};
use levy_ou::tail::remainder_tail_sum;
use statrs::function::gamma::gamma;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫_R (1 - cos y)|y|^{-1-α} dy` via the reflection-formula closed form.
fn i_alpha(alpha: f64) -> f64 {
    if alpha == 1.0 {
        PI
    } else {
        2.0 * gamma(2.0 - alpha) * (PI * alpha / 2.0).cos() / (alpha * (1.0 - alpha))
    }
}

/// `2∫_0^∞ (1 - cos u)/u² du` by brute force: Simpson on `[0, 2000π]` plus
/// the averaged tail `2·∫_L^∞ u^{-2} du`.
fn i_one_brute() -> f64 {
    let l = 2000.0 * PI;
    let f = |u: f64| if u == 0.0 { 0.5 } else { (1.0 - u.cos()) / (u * u) };
    2.0 * (simpson(f, 0.0, l, 400_000) + 1.0 / l)
}

#[test]
fn constant_matches_gamma_closed_form() {
    for alpha in [0.1, 0.5, 0.8, 0.999, 1.0, 1.001, 1.3, 1.5, 1.9, 1.99] {
        let c = standardization_constant(alpha).unwrap();
        assert_relative_eq!(c * i_alpha(alpha), 1.0, max_relative = 1e-8);
    }
    assert_relative_eq!(i_one_brute(), PI, max_relative = 1e-7);
    assert_relative_eq!(standardization_constant(1.0).unwrap(), 1.0 / PI, max_relative = 1e-10);
}

#[test]
fn tail_and_truncated_moments_match_density_quadrature() {
    for alpha in [0.3, 0.5, 1.0, 1.5, 1.8] {
        let m = LevyMeasure::stable(alpha).unwrap();
        for u in [1e-3, 0.5, 1.0, 2.0, 50.0] {
            // y = u·e^s on the tail, y = u·e^{-s} inside
            let tail = simpson(|s| m.density(u * s.exp()).unwrap() * u * s.exp(), 0.0, 40.0 / alpha, 40_000);
            let m2 = 2.0 * simpson(|s| {
                let y = u * (-s).exp();
                y * y * m.density(y).unwrap() * y
            }, 0.0, 40.0 / (2.0 - alpha), 40_000);
            let m3 = 2.0 * simpson(|s| {
                let y = u * (-s).exp();
                y * y * y * m.density(y).unwrap() * y
            }, 0.0, 40.0 / (3.0 - alpha), 40_000);
            assert_relative_eq!(m.tail_mass(u).unwrap(), tail, max_relative = 1e-9);
            assert_relative_eq!(m.truncated_second_moment(u).unwrap(), m2, max_relative = 1e-9);
            assert_relative_eq!(m.truncated_third_moment(u).unwrap(), m3, max_relative = 1e-9);
        }
    }
}

#[test]
#[allow(clippy::approx_constant)]
fn measure_reference_values() {
    let s1 = LevyMeasure::stable(1.0).unwrap();
    assert_relative_eq!(s1.tail_mass(2.0).unwrap(), 0.1591549, max_relative = 1e-6);
    assert_relative_eq!(s1.truncated_second_moment(1.0).unwrap(), 0.636_619_8, max_relative = 1e-6);
    let s05 = LevyMeasure::stable(0.5).unwrap();
    let c05 = 1.0 / i_alpha(0.5);
    assert_relative_eq!(s05.tail_mass(1.0).unwrap(), 2.0 * c05, max_relative = 1e-9);
    let s15 = LevyMeasure::stable(1.5).unwrap();
    let c15 = 1.0 / i_alpha(1.5);
    assert_relative_eq!(s15.truncated_second_moment(2.0).unwrap(), 2.0 * c15 * 2f64.sqrt() / 0.5, max_relative = 1e-9);
    assert_relative_eq!(s05.sample_magnitude(0.1, 0.75).unwrap(), 1.6, max_relative = 1e-12);
    assert_relative_eq!(s1.sample_magnitude(1.0, 0.5).unwrap(), 2.0, max_relative = 1e-12);
}

#[test]
fn coordinate_jump_count_mean() {
    let m = LevyMeasure::stable(1.0).unwrap();
    let root = RngStream::root(91);
    let reps = 100_000;
    let counts: Vec<f64> = (0..reps)
        .map(|r| sample_coordinate_jumps(1, &m, 1.0, 1.0, root.replicate(r)).unwrap().len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let se = (2.0 / PI / reps as f64).sqrt();
    assert!((mean - 2.0 / PI).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn large_jump_reference_values() {
    let m = DiagonalModel::single(LevyMeasure::stable(1.0).unwrap(), 1.0, 1.0).unwrap();
    assert_relative_eq!(large_jump_probability(&m, 1.0, 1).unwrap(), 1.0 - (-2.0 / PI).exp(), max_relative = 1e-10);
    assert_relative_eq!(expected_large_jump_count(&m, 1.0, 1).unwrap(), 0.4709, max_relative = 1e-4);
}

#[test]
fn remainder_sum_is_pi_over_three() {
    let m = DiagonalModel::with_b(LevyMeasure::stable(1.0).unwrap(), Sequence::power(1.0, -2.0), Sequence::power(1.0, 1.0)).unwrap();
    let full = remainder_tail_sum(&m, 1.0, 1, None).unwrap();
    assert_relative_eq!(full, PI / 3.0, max_relative = 1e-9);
    let partial = remainder_tail_sum(&m, 1.0, 1, Some(1_000_000)).unwrap();
    let brute: f64 = (1..=1_000_000u64).rev().map(|n| 2.0 / PI / (n as f64 * n as f64)).sum();
    assert_relative_eq!(partial, brute, max_relative = 1e-12);
}

#[test]
fn zeta_two_partial_sum() {
    let v = series_verdict(|n| Ok(1.0 / (n as f64 * n as f64)), Some(2.0)).unwrap();
    assert_eq!(v.verdict, Verdict::Converges);
    assert!((v.value - PI * PI / 6.0).abs() < 1e-6);
    assert_eq!(series_verdict(|n| Ok(1.0 / n as f64), Some(1.0)).unwrap().verdict, Verdict::Diverges);
}

#[test]
fn single_coordinate_psi() {
    let m = DiagonalModel::single(LevyMeasure::stable(1.0).unwrap(), 1.0, 1.0).unwrap();
    let oracle = simpson(|s| 2.0 * (-s).exp(), 0.0, 1.0, 2000);
    assert_relative_eq!(psi(&m, 2.0, 1.0).unwrap().value(), oracle, max_relative = 1e-10);
    assert_relative_eq!(oracle, 1.26424, max_relative = 1e-5);
    assert_eq!(psi(&m, 0.0, 1.0).unwrap().value(), 0.0);
}

fn kernel(name: &str, params: &[(&str, f64)], space: &StableMeasureSpace) -> ValidatedKernel {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let k = KernelRegistry::with_builtins().build(name, &p, 1.0).unwrap();
    ValidatedKernel::new(&k, space).unwrap()
}

#[test]
fn indicator_integral_reference_values() {
    for alpha in [0.6, 1.0, 1.7] {
        let space = StableMeasureSpace::interval(0.0, 1.0, alpha).unwrap();
        let c = 1.0 / i_alpha(alpha);
        let vk = kernel("indicator", &[], &space);
        assert_relative_eq!(vk.report().large_point_rate, 2.0 * c / alpha, max_relative = 1e-9);
        for delta in [0.01, 0.1] {
            let want = 2.0 * c * f64::powf(delta, 2.0 - alpha) / (2.0 - alpha);
            assert_relative_eq!(truncation_bound(&vk, delta).unwrap(), want, max_relative = 1e-8);
        }
        for t in [0.25, 1.0] {
            assert_relative_eq!(scale_parameter(&vk, t).unwrap(), t.powf(1.0 / alpha), max_relative = 1e-8);
        }
    }
    let s1 = StableMeasureSpace::interval(0.0, 1.0, 1.0).unwrap();
    assert_relative_eq!(truncation_bound(&kernel("indicator", &[], &s1), 0.01).unwrap(), 0.02 / PI, max_relative = 1e-8);
    assert_relative_eq!(scale_parameter(&kernel("indicator", &[], &s1), 0.5).unwrap(), 0.5, max_relative = 1e-8);
}

#[test]
fn ou_kernel_integrals_match_quadrature() {
    let lambda = 2.0;
    for alpha in [0.7, 1.5] {
        let space = StableMeasureSpace::interval(0.0, 1.0, alpha).unwrap();
        let vk = kernel("ou", &[("lambda", lambda)], &space);
        let c = 1.0 / i_alpha(alpha);
        let v = |x: f64| 2.0 - (-lambda * (1.0 - x)).exp();
        let rate = 2.0 * c / alpha * simpson(|x| v(x).powf(alpha), 0.0, 1.0, 4000);
        assert_relative_eq!(vk.report().large_point_rate, rate, max_relative = 1e-8);
        let delta: f64 = 0.05;
        let bound = simpson(
            |x| 2.0 * c * v(x).powi(2) * delta.min(1.0 / v(x)).powf(2.0 - alpha) / (2.0 - alpha),
            0.0,
            1.0,
            4000,
        );
        assert_relative_eq!(truncation_bound(&vk, delta).unwrap(), bound, max_relative = 1e-8);
        for t in [0.3, 1.0] {
            let scale = ((1.0 - (-alpha * lambda * t).exp()) / (alpha * lambda)).powf(1.0 / alpha);
            assert_relative_eq!(scale_parameter(&vk, t).unwrap(), scale, max_relative = 1e-8);
        }
    }
}

#[test]
fn discrete_space_uses_atom_weights() {
    let space = StableMeasureSpace::discrete(vec![0.2, 0.7], vec![0.5, 1.5], 1.0).unwrap();
    let vk = kernel("indicator", &[], &space);
    assert_relative_eq!(scale_parameter(&vk, 0.5).unwrap(), 0.5, max_relative = 1e-12);
    assert_relative_eq!(scale_parameter(&vk, 1.0).unwrap(), 2.0, max_relative = 1e-12);
    assert_relative_eq!(vk.report().large_point_rate, 2.0 / PI * 2.0, max_relative = 1e-10);
}

#[test]
fn zero_kernel_gives_zero_path() {
    let space = StableMeasureSpace::interval(0.0, 1.0, 1.2).unwrap();
    let vk = kernel("zero", &[], &space);
    let p = integral_path(&vk, 0.01, &[0.0, 0.5, 1.0], RngStream::root(4)).unwrap();
    assert!(p.values.iter().all(|v| *v == 0.0));
}
