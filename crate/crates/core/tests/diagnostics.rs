use ipla::diagnostics::{aggregate, oracle_moment, quartic_coordinate_moments};
use proptest::prelude::*;

/// Midpoint rule for `int_0^8 y^k exp(-y^4/4) dy`.
fn quartic_integral(k: i32) -> f64 {
    let n = 400_000;
    let h = 8.0 / n as f64;
    (0..n)
        .map(|i| {
            let y = (i as f64 + 0.5) * h;
            y.powi(k) * (-0.25 * y.powi(4)).exp()
        })
        .sum::<f64>()
        * h
}

#[test]
fn quartic_coordinate_moments_match_quadrature() {
    let z = quartic_integral(0);
    let lib = quartic_coordinate_moments();
    for (k, c) in [(2, lib[0]), (4, lib[1]), (6, lib[2])] {
        let q = quartic_integral(k) / z;
        assert!((c / q - 1.0).abs() < 1e-9, "k={k}: {c} vs {q}");
    }
    assert!((lib[0] - 0.675_978).abs() < 1e-5);
}

#[test]
fn product_moments_expand_the_norm_powers() {
    // In d = 2 with independent coordinates a, b:
    // |Y|^4 = a^4 + 2 a^2 b^2 + b^4 and |Y|^6 = a^6 + 3 a^4 b^2 + 3 a^2 b^4 + b^6.
    let [c2, c4, c6] = quartic_coordinate_moments();
    assert!((oracle_moment("quartic", 2, 4).unwrap() - (2.0 * c4 + 2.0 * c2 * c2)).abs() < 1e-12);
    assert!((oracle_moment("quartic", 2, 6).unwrap() - (2.0 * c6 + 6.0 * c4 * c2)).abs() < 1e-12);
    // Chi-square moments for the Gaussian.
    assert_eq!(oracle_moment("gaussian", 3, 2).unwrap(), 3.0);
    assert_eq!(oracle_moment("gaussian", 3, 4).unwrap(), 15.0);
    assert_eq!(oracle_moment("gaussian", 3, 6).unwrap(), 105.0);
    assert!(oracle_moment("ginzburg_landau", 3, 2).is_err());
}

#[test]
fn divergent_replica_poisons_the_aggregate() {
    let r = aggregate(&[1.0, f64::NAN, 1.2], 1.1, 2).unwrap();
    assert!(r.estimate.is_nan() && r.re.is_nan() && r.cv.is_nan());
    assert!(aggregate(&[1.0], 0.0, 2).is_err());
}

proptest! {
    #[test]
    fn aggregate_is_scale_free(
        est in prop::collection::vec(0.1f64..10.0, 2..20),
        truth in 0.1f64..10.0,
        scale in 0.01f64..100.0,
    ) {
        let a = aggregate(&est, truth, 4).unwrap();
        let scaled: Vec<f64> = est.iter().map(|e| e * scale).collect();
        let b = aggregate(&scaled, truth * scale, 4).unwrap();
        prop_assert!((a.re - b.re).abs() <= 1e-9 * (1.0 + a.re));
        prop_assert!((a.cv - b.cv).abs() <= 1e-9 * (1.0 + a.cv));
        prop_assert!(a.cv >= 0.0);
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        prop_assert!((a.re - (mean - truth).abs() / truth).abs() < 1e-12);
    }
}
