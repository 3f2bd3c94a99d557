//! Closed-form CDFs and quantiles of the samplers checked against numerical
//! integration of their densities.

mod support;

use growthrate::sim::*;
use support::{bisect, integrate};

const TOL: f64 = 1e-8;

fn check_cdf(
    name: &str,
    density: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
    lo: f64,
    points: &[f64],
) {
    for &x in points {
        let num = integrate(&density, lo, x, 1e-13);
        let exact = cdf(x);
        assert!(
            (num - exact).abs() < TOL,
            "{name}: x = {x}, integral {num}, cdf {exact}"
        );
    }
}

fn grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (1..k)
        .map(|i| lo + (hi - lo) * i as f64 / k as f64)
        .collect()
}

#[test]
fn y_cdf_matches_density() {
    for (n, delta) in [(5, 0.2254), (3, 0.01), (10, 0.6), (50, 1e-3)] {
        check_cdf(
            "Y",
            |y| y_density(n, delta, y),
            |y| y_cdf(n, delta, y),
            0.0,
            &grid(0.0, 1.0, 20),
        );
        let total = integrate(|y| y_density(n, delta, y), 0.0, 1.0, 1e-13);
        assert!((total - 1.0).abs() < TOL);
    }
}

#[test]
fn h_cdf_matches_density() {
    for (lambda, mu, horizon) in [
        (2.0, 1.0, 5.0),
        (1.0, 0.0, 3.0),
        (1.5, 0.2, 10.0),
        (0.7, 0.6, 25.0),
    ] {
        let p = BirthDeathParams::new(lambda, mu, horizon).unwrap();
        for y in [0.05, 0.5, 0.95] {
            check_cdf(
                "H|y",
                |t| h_exact_density(t, y, &p),
                |t| h_exact_cdf(t, y, &p),
                0.0,
                &grid(0.0, horizon, 25),
            );
            let total = integrate(|t| h_exact_density(t, y, &p), 0.0, horizon, 1e-13);
            assert!((total - 1.0).abs() < TOL, "total = {total}");
            for u in [0.01, 0.3, 0.5, 0.77, 0.99] {
                let t = h_exact_quantile(y, &p, u);
                assert!((h_exact_cdf(t, y, &p) - u).abs() < TOL);
            }
        }
    }
}

#[test]
fn q_cdf_matches_density() {
    for n in [3, 5, 10, 40] {
        let pts: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 2.0, 7.5, 30.0, 200.0]
            .iter()
            .map(|q| q * n as f64)
            .collect();
        check_cdf("Q", |q| q_density(n, q), |q| q_cdf(n, q), 0.0, &pts);
        for u in [0.02, 0.5, 0.98] {
            assert!((q_cdf(n, q_quantile(n, u)) - u).abs() < TOL);
        }
    }
}

#[test]
fn u_given_q_cdf_matches_density() {
    for q in [0.05, 0.3, 1.0, 4.0, 60.0] {
        let lo = -f64::ln(q);
        let pts: Vec<f64> = [0.01, 0.2, 1.0, 3.0, 10.0, 30.0]
            .iter()
            .map(|d| lo + d)
            .collect();
        check_cdf(
            "U|q",
            |u| u_given_q_density(q, u),
            |u| u_given_q_cdf(q, u),
            lo,
            &pts,
        );
        for v in [0.02, 0.5, 0.98] {
            assert!((u_given_q_cdf(q, u_given_q_quantile(q, v)) - v).abs() < TOL);
        }
    }
}

#[test]
fn logistic_cdf_matches_density() {
    check_cdf(
        "logistic",
        logistic_density,
        logistic_cdf,
        -60.0,
        &grid(-20.0, 20.0, 16),
    );
}

// Medians found by bisection on the integrated density, independent of the
// closed-form quantiles, and frozen below.
const Y_MEDIAN_N5: f64 = 0.602515346537;
const H_MEDIAN: f64 = 0.686431832071;

#[test]
fn frozen_medians() {
    let (n, delta) = (5, 0.2254);
    let oracle = bisect(
        |y| integrate(|s| y_density(n, delta, s), 0.0, y, 1e-14) - 0.5,
        0.0,
        1.0,
    );
    assert!((oracle - Y_MEDIAN_N5).abs() < 1e-9, "oracle {oracle:.12}");
    assert!((y_quantile(n, delta, 0.5) - oracle).abs() < TOL);

    let p = BirthDeathParams::new(2.0, 1.0, 5.0).unwrap();
    let oracle = bisect(
        |t| integrate(|s| h_exact_density(s, 0.5, &p), 0.0, t, 1e-14) - 0.5,
        0.0,
        5.0,
    );
    assert!((oracle - H_MEDIAN).abs() < 1e-9, "oracle {oracle:.12}");
    assert!((h_exact_quantile(0.5, &p, 0.5) - oracle).abs() < TOL);
}
