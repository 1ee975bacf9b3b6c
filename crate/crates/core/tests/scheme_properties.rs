use hjb_pi::benchmarks::BenchmarkSetup;
use hjb_pi::grid::GridField;
use hjb_pi::scheme::{bellman_residual, contraction_factor, resolvent_map};
use proptest::prelude::*;

fn field(setup: &BenchmarkSetup, values: &[f64]) -> GridField {
    GridField::from_values(&setup.grid, values.to_vec()).unwrap()
}

fn sup(a: &GridField, b: &GridField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_map_factors_through_resolvent(
        lambda in 0.2f64..3.0,
        values in prop::collection::vec(-5.0f64..5.0, 31),
    ) {
        let s = BenchmarkSetup::lq1d(lambda, 3.0, 0.2, 6.0).unwrap();
        let u = field(&s, &values);
        let f = bellman_residual(&s.problem, &s.params, &u).unwrap();
        let t = resolvent_map(&s.problem, &s.params, &u, None).unwrap();
        let c = s.params.center();
        for k in s.grid.interior_nodes() {
            let lhs = f.get(k);
            let rhs = c * (u.get(k) - t.get(k));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + u.max_abs()) * c);
        }
    }

    #[test]
    fn resolvent_contracts_on_2d(
        a in prop::collection::vec(-3.0f64..3.0, 121),
        b in prop::collection::vec(-3.0f64..3.0, 121),
    ) {
        let s = BenchmarkSetup::manufactured2d(1.0, 2.0, 0.4, 2.0).unwrap();
        let u = field(&s, &a).with_boundary_of(&s.boundary).unwrap();
        let w = field(&s, &b).with_boundary_of(&s.boundary).unwrap();
        let tu = resolvent_map(&s.problem, &s.params, &u, None).unwrap();
        let tw = resolvent_map(&s.problem, &s.params, &w, None).unwrap();
        let beta = contraction_factor(1.0, 2, s.params.viscosity(), 0.4);
        prop_assert!(sup(&tu, &tw) <= beta * sup(&u, &w) + 1e-12);
    }

    #[test]
    fn resolvent_is_order_preserving(
        a in prop::collection::vec(-3.0f64..3.0, 31),
        bump in prop::collection::vec(0.0f64..1.0, 31),
    ) {
        let s = BenchmarkSetup::lq1d(1.0, 3.0, 0.2, 6.0).unwrap();
        let u = field(&s, &a);
        let higher: Vec<f64> = a.iter().zip(&bump).map(|(x, d)| x + d).collect();
        let w = field(&s, &higher);
        let tu = resolvent_map(&s.problem, &s.params, &u, None).unwrap();
        let tw = resolvent_map(&s.problem, &s.params, &w, None).unwrap();
        for k in s.grid.interior_nodes() {
            prop_assert!(tu.get(k) <= tw.get(k) + 1e-12);
        }
    }
}
