mod common;

use distsom_core::{barycenter, decompose, register, w2_squared, QuantileFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qf(seed: u64) -> QuantileFunction {
    common::random_quantile_with_jumps(&mut ChaCha8Rng::seed_from_u64(seed), 8)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn distance_splits_into_mean_and_dispersion(s in any::<u64>(), t in any::<u64>()) {
        let (a, b) = (qf(s), qf(t));
        let c = decompose(&a, &b);
        prop_assert!(close(w2_squared(&a, &b), c.mean + c.dispersion, 1e-9));
        prop_assert!((c.mean - (a.mean() - b.mean()).powi(2)).abs() < 1e-12 * (1.0 + c.mean));
        prop_assert!(c.dispersion >= -1e-12);
    }

    #[test]
    fn distance_matches_quadrature(s in any::<u64>(), t in any::<u64>()) {
        let (a, b) = (qf(s), qf(t));
        let exact = w2_squared(&a, &b);
        let approx = common::quadrature_w2(&a, &b, 20_000);
        // Jumps limit the midpoint rule to first order.
        prop_assert!((exact - approx).abs() <= 1e-3 * (1.0 + exact), "{} vs {}", exact, approx);
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_the_diagonal(s in any::<u64>(), t in any::<u64>()) {
        let (a, b) = (qf(s), qf(t));
        prop_assert!(close(w2_squared(&a, &b), w2_squared(&b, &a), 1e-12));
        prop_assert_eq!(w2_squared(&a, &a), 0.0);
    }

    #[test]
    fn root_distance_obeys_the_triangle_inequality(s in any::<u64>(), t in any::<u64>(), u in any::<u64>()) {
        let (a, b, c) = (qf(s), qf(t), qf(u));
        let d = |x: &QuantileFunction, y: &QuantileFunction| w2_squared(x, y).sqrt();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn shifting_leaves_the_dispersion_term(s in any::<u64>(), t in any::<u64>(), c in -50.0f64..50.0) {
        let (a, b) = (qf(s), qf(t));
        let moved = decompose(&a.shifted(c), &b);
        let base = decompose(&a, &b);
        prop_assert!(close(moved.dispersion, base.dispersion, 1e-9));
        prop_assert!(close(moved.mean, (a.mean() + c - b.mean()).powi(2), 1e-9));
    }

    #[test]
    fn barycenter_lies_on_the_geodesic(s in any::<u64>(), t in any::<u64>(), w in 0.0f64..1.0) {
        let (a, b) = (qf(s), qf(t));
        let g = barycenter(&[&a, &b], &[w, 1.0 - w]).unwrap();
        let full = w2_squared(&a, &b);
        prop_assert!(close(w2_squared(&a, &g), (1.0 - w).powi(2) * full, 1e-9));
        prop_assert!(close(w2_squared(&b, &g), w.powi(2) * full, 1e-9));
    }

    #[test]
    fn registration_preserves_values(s in any::<u64>(), t in any::<u64>(), p in 0.0f64..1.0) {
        let (a, b) = (qf(s), qf(t));
        let (ra, rb) = register(&a, &b);
        prop_assert_eq!(ra.probs(), rb.probs());
        prop_assert!(close(common::oracle_eval(&ra, p), common::oracle_eval(&a, p), 1e-12));
        prop_assert!(close(common::oracle_eval(&rb, p), common::oracle_eval(&b, p), 1e-12));
        prop_assert!(close(ra.mean(), a.mean(), 1e-12));
    }
}
