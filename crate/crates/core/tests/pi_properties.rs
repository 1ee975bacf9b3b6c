use hjb_pi::benchmarks::{lq_riccati_coefficient, BenchmarkSetup};
use hjb_pi::linsolve::SorSettings;
use hjb_pi::pi::{policy_evaluate, run_policy_iteration, InitialPolicy, PIConfig, StopReason};
use hjb_pi::problem::PolicyField;
use hjb_pi::scheme::apply_policy_operator;
use proptest::prelude::*;

fn greedy(iterations: usize) -> PIConfig {
    PIConfig {
        max_outer_iterations: iterations,
        record_iterates: true,
        ..PIConfig::default()
    }
}

#[test]
fn frozen_optimal_policy_is_close_to_the_value_function() {
    let s = BenchmarkSetup::lq1d(1.0, 3.0, 0.03, 6.0).unwrap();
    let p = lq_riccati_coefficient(1.0).unwrap();
    let policy = PolicyField::from_fn(&s.grid, 6.0, |k| {
        [-p * s.grid.coord(k)[0]].into_iter().collect()
    });
    let (v, _) = policy_evaluate(
        &s.problem,
        &s.params,
        &policy,
        &s.boundary,
        &SorSettings::default(),
        None,
    )
    .unwrap();
    let gap = v
        .values()
        .iter()
        .zip(s.reference.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(gap <= 0.1, "{gap}");
    let residual = apply_policy_operator(&s.problem, &s.params, &policy, &v).unwrap();
    assert!(residual.max_abs() <= 1e-9, "{}", residual.max_abs());
}

#[test]
fn sor_evaluation_certificate_in_2d() {
    let s = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.1, 2.0).unwrap();
    let policy = PolicyField::zeros(&s.grid);
    let sor = SorSettings::default();
    let (v, stats) =
        policy_evaluate(&s.problem, &s.params, &policy, &s.boundary, &sor, None).unwrap();
    assert!(stats.converged);
    let residual = apply_policy_operator(&s.problem, &s.params, &policy, &v).unwrap();
    // an update of size tol leaves a residual of order center * tol
    assert!(
        residual.max_abs() <= 10.0 * s.params.center() * sor.tol,
        "{}",
        residual.max_abs()
    );
}

#[test]
fn relaxed_2d_run_reaches_the_fixed_point_from_the_adversarial_start() {
    let s = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.2, 2.0).unwrap();
    let cfg = PIConfig {
        max_outer_iterations: 200,
        relaxation_theta: 0.18,
        initial_policy: InitialPolicy::Adversarial2d,
        outer_tolerance: Some(1e-11),
        ..PIConfig::default()
    };
    let report =
        run_policy_iteration(&s.problem, &s.params, &s.boundary, &cfg, Some(&s.reference)).unwrap();
    assert_eq!(report.stop_reason, StopReason::Converged);
    assert!(report.records.last().unwrap().linf_error.unwrap() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_iterates_decrease_and_stay_bounded(
        lambda in 0.3f64..3.0,
        cells in prop::sample::select(vec![20usize, 30, 40, 60]),
        a_max in 5.0f64..8.0,
    ) {
        let h = 6.0 / cells as f64;
        let s = BenchmarkSetup::lq1d(lambda, 3.0, h, a_max).unwrap();
        let report = run_policy_iteration(&s.problem, &s.params, &s.boundary, &greedy(15), None).unwrap();
        prop_assert!(report.max_monotonicity_violation() <= 1e-8);
        let bound = (s.cost_sup_norm() / lambda).max(s.boundary.max_abs_boundary());
        for v in &report.iterates {
            prop_assert!(v.max_abs() <= bound + 1e-9);
        }
        prop_assert_eq!(report.records.len(), report.iterates.len());
    }

    #[test]
    fn greedy_2d_iterates_decrease(theta_steps in 5usize..12) {
        let s = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.2, 2.0).unwrap();
        let cfg = PIConfig {
            initial_policy: InitialPolicy::Adversarial2d,
            ..greedy(theta_steps)
        };
        let report = run_policy_iteration(&s.problem, &s.params, &s.boundary, &cfg, Some(&s.reference)).unwrap();
        prop_assert!(report.max_monotonicity_violation() <= 1e-8);
    }
}
