use std::collections::BTreeMap;

use levy_ou::criteria::{classify, classify_at, necessary_condition, sufficient_condition};
use levy_ou::field::JumpPoint;
use levy_ou::measure::LevyMeasure;
use levy_ou::model::{DiagonalModel, MeasureFamily, Sequence};
use levy_ou::ou::{coordinate_path, project_path, split_path, TimeGrid};
use levy_ou::par::Execution;
use levy_ou::psi::psi;
use levy_ou::rng::RngStream;
use levy_ou::series::Verdict;
use levy_ou::stable_integral::{
    evaluate_points, IntegralOptions, IntegralPlan, KernelRegistry, KernelSpec, MeasurePoint, StableMeasureSpace,
    ValidatedKernel,
};
use levy_ou::verify::marginal_law_check;
use proptest::prelude::*;

/// Keeps `x` at least `gap` away from 1 so p-series verdicts are decidable.
fn off_boundary(x: f64, gap: f64) -> bool {
    (x - 1.0).abs() > gap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_identity_holds(alpha in 0.4f64..1.9, be in -2.5f64..-0.8, eps in 0.05f64..2.0, seed in any::<u64>()) {
        let m = DiagonalModel::with_b(LevyMeasure::stable(alpha).unwrap(), Sequence::power(1.0, be), Sequence::power(1.0, 1.0)).unwrap();
        let grid = TimeGrid::uniform(1.0, 41).unwrap();
        let delta = eps / 50.0;
        let s = RngStream::root(seed);
        let sp = split_path(&m, eps, delta, 30, grid.clone(), s).unwrap();
        prop_assert!(sp.split_identity_error() <= 1e-12 * sp.split_identity_scale());
        let y = project_path(&m, delta, 30, grid, s).unwrap();
        for (a, b) in y.values.iter().zip(&sp.values) {
            prop_assert!((a - b).abs() <= 1e-12 * sp.split_identity_scale());
        }
    }

    #[test]
    fn psi_is_alpha_homogeneous(alpha in 0.3f64..1.95, theta in 0.05f64..5.0, k in 0.1f64..10.0, t in 0.1f64..2.0) {
        let m = DiagonalModel::with_b(LevyMeasure::stable(alpha).unwrap(), Sequence::power(1.0, -1.5), Sequence::power(1.0, 1.0))
            .unwrap()
            .with_horizon(2.0)
            .unwrap();
        let a = psi(&m, k * theta, t).unwrap().value();
        let b = psi(&m, theta, t).unwrap().value();
        prop_assert!((a - k.powf(alpha) * b).abs() <= 1e-8 * a.abs().max(1e-300));
        let neg = psi(&m, -theta, t).unwrap().value();
        prop_assert!((neg - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn per_z_verdicts_do_not_depend_on_epsilon(alpha in 0.3f64..1.9, be in -3.0f64..-0.2) {
        prop_assume!(off_boundary(-alpha * be, 0.05));
        let m = DiagonalModel::with_b(LevyMeasure::stable(alpha).unwrap(), Sequence::power(1.0, be), Sequence::power(1.0, 1.0)).unwrap();
        let base = (necessary_condition(&m, 1.0).unwrap().verdict, sufficient_condition(&m, 1.0).unwrap().verdict);
        for eps in [0.1, 10.0] {
            prop_assert_eq!(necessary_condition(&m, eps).unwrap().verdict, base.0);
            prop_assert_eq!(sufficient_condition(&m, eps).unwrap().verdict, base.1);
            prop_assert_eq!(classify_at(&m, eps).unwrap().classification, classify(&m).unwrap().classification);
        }
    }

    #[test]
    fn stable_verdicts_follow_the_p_series(alpha in 0.2f64..1.95, p in 0.2f64..3.0) {
        prop_assume!(off_boundary(alpha * p, 0.05));
        let m = DiagonalModel::with_b(LevyMeasure::stable(alpha).unwrap(), Sequence::power(1.0, -p), Sequence::power(1.0, 1.0)).unwrap();
        let want = if alpha * p > 1.0 { Verdict::Converges } else { Verdict::Diverges };
        let r = classify(&m).unwrap();
        prop_assert_eq!(r.necessary.verdict, want);
        prop_assert_eq!(r.sufficient.verdict, want);
        prop_assert_eq!(r.combined_form.verdict, want);
        prop_assert_eq!(r.stable_dichotomy.verdict, want);
    }

    #[test]
    fn cylindrical_condition_implies_per_z_convergence(alpha in 0.2f64..1.9, p in 0.05f64..3.0, r in 0.55f64..3.0) {
        let k = 2.0 * alpha / (2.0 - alpha);
        prop_assume!(p * k > 1.05);
        let m = DiagonalModel::stable_power(alpha, 1.0, 1.0, p, r).unwrap();
        let rep = classify(&m).unwrap();
        prop_assert_eq!(rep.cylindrical.verdict, Verdict::Converges);
        prop_assert_eq!(rep.stable_dichotomy.verdict, Verdict::Converges);
    }

    #[test]
    fn per_z_sum_obeys_holder_bound(
        alpha in 0.2f64..1.9,
        sigma in prop::collection::vec(0.0f64..2.0, 1..60),
        z in prop::collection::vec(-3.0f64..3.0, 60),
    ) {
        let n = sigma.len();
        let z = z[..n].to_vec();
        let m = DiagonalModel::new(
            Sequence::power(1.0, 1.0),
            Sequence::Table(sigma.clone()),
            Sequence::Table(z.clone()),
            MeasureFamily::Common(LevyMeasure::stable(alpha).unwrap()),
            1.0,
        ).unwrap();
        let k = 2.0 * alpha / (2.0 - alpha);
        let s_sigma: f64 = sigma.iter().map(|s| s.powf(k)).sum();
        let s_z: f64 = z.iter().map(|v| v * v).sum();
        let bound = s_sigma.powf((2.0 - alpha) / 2.0) * s_z.powf(alpha / 2.0);
        let direct: f64 = sigma.iter().zip(&z).map(|(s, v)| (s * v).abs().powf(alpha)).sum();
        let got = classify(&m).unwrap().stable_dichotomy.value;
        prop_assert!((got - direct).abs() <= 1e-10 * direct.max(1.0));
        prop_assert!(got <= bound * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn coordinate_path_matches_direct_sum(
        raw in prop::collection::vec((0.0f64..1.0, 0.01f64..5.0, any::<bool>()), 0..30),
        gamma in 0.01f64..20.0,
        b in 0.0f64..3.0,
    ) {
        let mut points: Vec<JumpPoint> = raw
            .iter()
            .map(|&(time, magnitude, s)| JumpPoint { coord: 1, time, magnitude, sign: if s { 1 } else { -1 } })
            .collect();
        points.sort_by(|a, b| a.time.total_cmp(&b.time));
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let path = coordinate_path(&points, gamma, b, 1, &grid).unwrap();
        for (t, v) in grid.iter().zip(&path) {
            let direct: f64 = points
                .iter()
                .filter(|p| p.time <= *t)
                .map(|p| b * p.signed() * (-gamma * (t - p.time)).exp())
                .sum();
            prop_assert!((v - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
        let neg = coordinate_path(&points, gamma, b, -1, &grid).unwrap();
        prop_assert!(path.iter().zip(&neg).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn integral_evaluation_is_linear(
        raw in prop::collection::vec((0.01f64..5.0, any::<bool>(), 0.0f64..1.0), 0..40),
        a in 0.0f64..3.0,
        lambda in 0.0f64..5.0,
    ) {
        let points: Vec<MeasurePoint> = raw
            .iter()
            .map(|&(magnitude, s, location)| MeasurePoint { magnitude, sign: if s { 1 } else { -1 }, location })
            .collect();
        let reg = KernelRegistry::with_builtins();
        let ou = reg.build("ou", &BTreeMap::from([("lambda".to_string(), lambda)]), 1.0).unwrap();
        let ind = reg.build("indicator", &BTreeMap::new(), 1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let (p1, p2) = ou.parts();
        let whole = evaluate_points(&ou, &points, &grid);
        let f1 = evaluate_points(&p1, &points, &grid);
        let f2 = evaluate_points(&p2, &points, &grid);
        for i in 0..grid.len() {
            prop_assert_eq!(whole[i], f1[i] - f2[i]);
        }
        let scaled = evaluate_points(&ind.scaled(a).unwrap(), &points, &grid);
        let base = evaluate_points(&ind, &points, &grid);
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!((s - a * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn equal_streams_give_equal_integral_paths() {
    let space = StableMeasureSpace::interval(0.0, 1.0, 1.3).unwrap();
    let k = KernelSpec::new("ramp", |t, x| if x <= t { t - x } else { 0.0 }, 1.0).unwrap();
    let vk = ValidatedKernel::new(&k, &space).unwrap();
    let plan = IntegralPlan::new(&vk, 0.01, vec![0.0, 0.5, 1.0], IntegralOptions::default()).unwrap();
    let s = RngStream::root(8);
    assert_eq!(plan.sample(s).unwrap(), plan.sample(s).unwrap());
    assert_ne!(plan.sample(s).unwrap().values, plan.sample(RngStream::root(9)).unwrap().values);
}

#[test]
fn verification_is_identical_across_execution_modes() {
    let s = RngStream::root(17);
    let a = marginal_law_check(1.2, 1.0, None, None, 10_000, s, Execution::Sequential);
    let b = marginal_law_check(1.2, 1.0, None, None, 10_000, s, Execution::Parallel);
    assert_eq!(a.unwrap().to_text(), b.unwrap().to_text());
}
