//! Spatial moment law, causality and positivity of the operator G.

use std::f64::consts::PI;
use std::time::Instant;

use dskg_core::goperator::{apply_g_1d, apply_g_radial_3d, moment_of_g, FnSource, SourceField};
use dskg_core::quadrature::{integrate, integrate_with_breaks, QuadOptions};

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn spatial_integral<S: SourceField>(f: &S, b: f64) -> f64 {
    let r = f.support_radius();
    integrate(|x| f.value(x, b), -r, r, &QuadOptions::abs(1e-13))
        .unwrap()
        .value
}

fn check_moment_law<S: SourceField>(name: &str, f: &S, t: f64, mass: f64) {
    let r = f.support_radius();
    let reach = r + 1.0 - (-t).exp();
    let g_tol = 1e-10;
    let total = integrate_with_breaks(
        |x| apply_g_1d(f, x, t, mass, g_tol).unwrap(),
        &[-reach, -r, r, reach],
        &QuadOptions {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_subdivisions: 500,
        },
    )
    .unwrap()
    .value;
    let predicted = moment_of_g(|b| spatial_integral(f, b), t, mass, 1e-12).unwrap();
    let rel = ((total - predicted) / predicted).abs();
    assert!(rel <= 1e-6, "{name} M={mass}: {total} vs {predicted} (rel {rel:e})");
}

#[test]
fn moment_law_for_compact_sources() {
    let start = Instant::now();
    let s1 = FnSource::new(|x: f64, _b| bump(x / 0.5), 0.5);
    let s2 = FnSource::new(|x: f64, b| (1.0 - x * x).powi(2) * (1.0 + b), 1.0);
    let s3 = FnSource::new(|x: f64, b| bump((x - 0.3) / 0.4) * (-b).exp(), 0.7);
    let s4 = FnSource::new(|x: f64, b| (0.5 * PI * x).cos().powi(2) * (1.0 + b.sin()), 1.0);
    let s5 = FnSource::new(|x: f64, b| (1.0 - x * x).powi(3) * (2.0 + x) * (1.0 + 0.5 * b * b), 1.0);
    check_moment_law("bump", &s1, 1.5, 0.4);
    check_moment_law("quartic", &s2, 1.0, 0.0);
    check_moment_law("shifted bump", &s3, 2.0, 1.2);
    check_moment_law("cosine", &s4, 1.2, 0.25);
    check_moment_law("asymmetric", &s5, 0.8, 0.7);
    eprintln!("moment law over five sources took {:?}", start.elapsed());
}

#[test]
fn causality_outside_the_cone() {
    // Support [-0.5, 0.5]; at t the region of influence is |x| < 0.5 + 1 - e^{-t}.
    let f = FnSource::new(|x: f64, _b| bump(x / 0.5), 0.5);
    let t: f64 = 1.0;
    let edge = 0.5 + 1.0 - (-t).exp();
    for x in [edge + 1e-6, edge + 0.3, -edge - 0.1] {
        assert_eq!(apply_g_1d(&f, x, t, 0.3, 1e-8).unwrap(), 0.0, "x={x}");
    }
    assert!(apply_g_1d(&f, edge - 0.05, t, 0.3, 1e-8).unwrap() > 0.0);
}

#[test]
fn positive_sources_give_positive_solutions() {
    let f = FnSource::new(|x: f64, b| bump(x) * (1.0 + b), 1.0);
    for mass in [0.0, 0.3, 0.9] {
        for x in [-1.2, -0.4, 0.0, 0.7, 1.5] {
            let v = apply_g_1d(&f, x, 1.3, mass, 1e-8).unwrap();
            assert!(v >= 0.0, "M={mass} x={x}: {v}");
        }
    }
}

#[test]
fn radial_constant_source_drops_spatial_structure() {
    // f = 1 on a support containing every cone: G = int_0^t sinh(M(t-b))/M db.
    let f = FnSource::new(|_r, _b| 1.0, 10.0);
    for &(mass, t) in &[(0.4, 1.0), (0.0, 2.0), (1.1, 1.5)] {
        let v = apply_g_radial_3d(&f, 0.7, t, mass, 1e-9).unwrap();
        let expect = moment_of_g(|_| 1.0, t, mass, 1e-12).unwrap();
        assert!((v - expect).abs() < 1e-8, "M={mass} t={t}: {v} vs {expect}");
        let v0 = apply_g_radial_3d(&f, 0.0, t, mass, 1e-9).unwrap();
        assert!((v0 - expect).abs() < 1e-7, "origin: {v0} vs {expect}");
    }
}

#[test]
fn radial_gaussian_source_moment() {
    // Truncated Gaussian in R^3; integrate the output over space on a radial grid.
    let rf = 1.0;
    let f = FnSource::new(
        |r: f64, b| (-4.0 * r * r).exp() * (1.0 + b) - (-4.0f64).exp() * (1.0 + b),
        rf,
    );
    let (t, mass): (f64, f64) = (1.2, 0.5);
    let reach = rf + 1.0 - (-t).exp();
    let total = integrate_with_breaks(
        |rho| 4.0 * PI * rho * rho * apply_g_radial_3d(&f, rho, t, mass, 1e-10).unwrap(),
        &[0.0, rf, reach],
        &QuadOptions {
            abs_tol: 1e-8,
            rel_tol: 0.0,
            max_subdivisions: 500,
        },
    )
    .unwrap()
    .value;
    let q = |b: f64| {
        integrate(|r| 4.0 * PI * r * r * f.value(r, b), 0.0, rf, &QuadOptions::abs(1e-13))
            .unwrap()
            .value
    };
    let predicted = moment_of_g(q, t, mass, 1e-12).unwrap();
    assert!(((total - predicted) / predicted).abs() < 1e-6, "{total} vs {predicted}");
}
