//! Dimensional descent: identities for f = 1, linearity, reductions.

use dskg_core::descent::{
    even_descent, identity_check, odd_descent, spherical_mean, wave_mean, DimensionConstants, EvenNormalization,
    IdentityCase, RadialProfile,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dims(n: usize) -> DimensionConstants {
    DimensionConstants::new(n).unwrap()
}

#[test]
fn sphere_descent_of_unit_field_is_one() {
    let d = dims(3);
    let profile = RadialProfile::callable(move |r| spherical_mean(|_| 1.0, &[0.0; 3], r, &d).unwrap(), 8);
    for r in [0.01, 0.1, 0.4, 0.9] {
        let v = odd_descent(&profile, r, &d).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "r={r}: {v}");
    }
}

#[test]
fn odd_and_one_dimensional_identities_agree() {
    for &(m, b, t) in &[(0.0, 0.0, 1.0), (0.4, 0.0, 1.0), (1.1, 0.5, 2.5)] {
        let r1 = identity_check(IdentityCase::I, m, b, t, &dims(1), 1e-9).unwrap();
        let r3 = identity_check(IdentityCase::Ii, m, b, t, &dims(3), 1e-9).unwrap();
        assert!(r1 <= 1e-9 && r3 <= 1e-9, "{r1} {r3}");
    }
}

#[test]
fn higher_dimensional_identities_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let m: f64 = rng.gen_range(0.0..1.5);
        let b: f64 = rng.gen_range(0.0..2.0);
        let t = b + rng.gen_range(0.0..2.0);
        for (case, n) in [(IdentityCase::Ii, 3), (IdentityCase::Iii, 2)] {
            let r = identity_check(case, m, b, t, &dims(n), 1e-8).unwrap();
            assert!(r <= 1e-7, "case {case} M={m} b={b} t={t}: residual {r}");
        }
    }
}

#[test]
fn corollary_cases_hold() {
    for (case, n) in [
        (IdentityCase::CorollaryI, 1),
        (IdentityCase::CorollaryIi, 3),
        (IdentityCase::CorollaryIii, 2),
    ] {
        let r = identity_check(case, 0.0, 0.2, 1.7, &dims(n), 1e-8).unwrap();
        assert!(r <= 1e-7, "{case}: {r}");
    }
}

#[test]
fn wave_mean_at_zero_radius_is_the_field() {
    let f = |y: &[f64]| (y[0] - 0.2).cos() * (1.0 + y.iter().skip(1).sum::<f64>());
    assert_eq!(wave_mean(f, &[0.7], 0.0, &dims(1)).unwrap(), f(&[0.7]));
    let x = [0.7, -0.1, 0.3];
    assert!((wave_mean(f, &x, 0.0, &dims(3)).unwrap() - f(&x)).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn descent_operators_are_linear(
        a in -3.0f64..3.0,
        c in -3.0f64..3.0,
        r in 0.05f64..2.0,
        e1 in 0i32..5,
        e2 in 0i32..5,
    ) {
        let g1 = RadialProfile::Laurent(vec![(e1, 1.0)]);
        let g2 = RadialProfile::Laurent(vec![(e2, 1.0), (0, 0.5)]);
        let combo = RadialProfile::Laurent(vec![(e1, a), (e2, c), (0, 0.5 * c)]);
        for n in [3usize, 5] {
            let d = dims(n);
            let lhs = odd_descent(&combo, r, &d).unwrap();
            let rhs = a * odd_descent(&g1, r, &d).unwrap() + c * odd_descent(&g2, r, &d).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
        }
        for n in [2usize, 4] {
            let d = dims(n);
            let norm = EvenNormalization::Euclidean;
            let lhs = even_descent(&combo, r, &d, norm).unwrap();
            let rhs = a * even_descent(&g1, r, &d, norm).unwrap() + c * even_descent(&g2, r, &d, norm).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
        }
        // Finite-difference profiles are linear up to rounding.
        let f1 = RadialProfile::callable(|s| (s * 1.3).sin() + 2.0, 4);
        let f2 = RadialProfile::callable(|s| (-s * s).exp(), 4);
        let fc = RadialProfile::callable(move |s| a * ((s * 1.3).sin() + 2.0) + c * (-s * s).exp(), 4);
        let d = dims(3);
        let lhs = odd_descent(&fc, r, &d).unwrap();
        let rhs = a * odd_descent(&f1, r, &d).unwrap() + c * odd_descent(&f2, r, &d).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }
}
