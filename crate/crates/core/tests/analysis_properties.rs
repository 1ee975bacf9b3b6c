use hjb_pi::analysis::{error_metrics, fit_geometric_rate, fit_power_rate, total_error_bound};
use hjb_pi::grid::{Grid, GridField};
use proptest::prelude::*;

proptest! {
    #[test]
    fn metrics_are_symmetric_and_ordered(
        a in prop::collection::vec(-10.0f64..10.0, 81),
        b in prop::collection::vec(-10.0f64..10.0, 81),
    ) {
        let g = Grid::new(1.0, 0.25, 2).unwrap();
        let u = GridField::from_values(&g, a).unwrap();
        let v = GridField::from_values(&g, b).unwrap();
        let (linf, l2) = error_metrics(&u, &v).unwrap();
        prop_assert_eq!(error_metrics(&v, &u).unwrap(), (linf, l2));
        prop_assert_eq!(error_metrics(&u, &u).unwrap(), (0.0, 0.0));
        prop_assert!(l2 <= linf * (0.0625f64 * 81.0).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn fits_recover_exact_laws(rate in 0.05f64..0.95, order in 0.2f64..2.0, c in 0.1f64..10.0) {
        let r: Vec<f64> = (0..20).map(|n| c * rate.powi(n)).collect();
        prop_assert!((fit_geometric_rate(&r).unwrap().factor() - rate).abs() < 1e-10);
        let h = [0.4f64, 0.2, 0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(order)).collect();
        prop_assert!((fit_power_rate(&h, &e).unwrap().slope - order).abs() < 1e-10);
    }

    #[test]
    fn bound_decreases_in_n_and_grows_in_constants(
        n in 0usize..500,
        h in 0.01f64..0.5,
        c1 in 0.1f64..10.0,
        c2 in 0.1f64..10.0,
    ) {
        let b = |c1: f64, c2: f64, n: usize| total_error_bound(c1, c2, n, h, 1.0, 1, 3.0).unwrap().bound;
        prop_assert!(b(c1, c2, n + 1) <= b(c1, c2, n));
        prop_assert!(b(c1 * 1.5, c2, n) >= b(c1, c2, n));
        prop_assert!(b(c1, c2 * 1.5, n) >= b(c1, c2, n));
    }
}
