//! Maximum-likelihood fit of a location-scale logistic model `x_i = a + b U_i`.
//!
//! Newton's method runs on `(a, log b)` with the analytic gradient and
//! Hessian and a backtracking line search on the log-likelihood. If it
//! stalls, a coordinate-wise bisection on the two stationarity equations
//! takes over. Convergence is judged on the gradient in scale-free
//! coordinates, `(b dl/da, b dl/db) / m`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const GRAD_TOL: f64 = 1e-8;
const NEWTON_ITERS: usize = 100;
const BISECTION_SWEEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleFit {
    /// `a`, in time units.
    pub location: f64,
    /// `b > 0`, in time units; the growth-rate estimate is `1 / b`.
    pub scale: f64,
    pub loglik: f64,
    pub converged: bool,
    pub grad_norm: f64,
}

struct Sums {
    loglik: f64,
    /// sum tanh(z/2), i.e. `b dl/da`
    g: f64,
    /// sum z tanh(z/2) - m, i.e. `b dl/db`
    zg: f64,
    gp: f64,
    gpz: f64,
    gpzz: f64,
}

fn sums(x: &[f64], a: f64, b: f64) -> Sums {
    let m = x.len() as f64;
    let mut s = Sums {
        loglik: -m * b.ln(),
        g: 0.0,
        zg: -m,
        gp: 0.0,
        gpz: 0.0,
        gpzz: 0.0,
    };
    for &xi in x {
        let z = (xi - a) / b;
        let az = z.abs();
        s.loglik += -az - 2.0 * (-az).exp().ln_1p();
        let g = (0.5 * z).tanh();
        let gp = 0.5 * (1.0 - g * g);
        s.g += g;
        s.zg += z * g;
        s.gp += gp;
        s.gpz += gp * z;
        s.gpzz += gp * z * z;
    }
    s
}

fn loglik(x: &[f64], a: f64, b: f64) -> f64 {
    sums(x, a, b).loglik
}

fn grad_norm(s: &Sums, m: f64) -> f64 {
    s.g.hypot(s.zg) / m
}

pub fn fit_logistic(x: &[f64]) -> Result<MleFit> {
    let m = x.len();
    if m < 2 {
        return Err(Error::SampleTooSmall { n: m + 1, min: 3 });
    }
    let mf = m as f64;
    let mean = x.iter().sum::<f64>() / mf;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::DegenerateTimes);
    }

    let mut a = mean;
    let mut b = var.sqrt() * 3f64.sqrt() / PI;
    let mut s = sums(x, a, b);

    for _ in 0..NEWTON_ITERS {
        if grad_norm(&s, mf) < GRAD_TOL {
            break;
        }
        // gradient and Hessian in (a, theta = ln b)
        let ga = s.g / b;
        let gt = s.zg;
        let haa = -s.gp / (b * b);
        let hat = -(s.g + s.gpz) / b;
        let htt = -(s.zg + mf + s.gpzz);
        let det = haa * htt - hat * hat;

        let (da, dt) = if haa < 0.0 && det > 0.0 {
            ((-htt * ga + hat * gt) / det, (hat * ga - haa * gt) / det)
        } else {
            // ascent step in scale-free coordinates
            (b * s.g / mf, s.zg / mf)
        };

        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let na = a + step * da;
            let nb = b * (step * dt).exp();
            if nb.is_finite() && nb > 0.0 && loglik(x, na, nb) >= s.loglik {
                a = na;
                b = nb;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        s = sums(x, a, b);
    }

    if grad_norm(&s, mf) >= GRAD_TOL {
        (a, b) = coordinate_bisection(x, a, b);
        s = sums(x, a, b);
    }

    let g = grad_norm(&s, mf);
    Ok(MleFit {
        location: a,
        scale: b,
        loglik: s.loglik,
        converged: g < GRAD_TOL,
        grad_norm: g,
    })
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(lo) > 0 > f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Alternately solves `sum tanh((x-a)/2b) = 0` for `a` and
/// `sum z tanh(z/2) = m` for `b`; both left sides are monotone.
fn coordinate_bisection(x: &[f64], mut a: f64, mut b: f64) -> (f64, f64) {
    let m = x.len() as f64;
    let lo_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..BISECTION_SWEEPS {
        a = bisect(lo_x, hi_x, |a| {
            x.iter().map(|&v| (0.5 * (v - a) / b).tanh()).sum()
        });
        let excess = |b: f64| {
            x.iter()
                .map(|&v| {
                    let z = (v - a) / b;
                    z * (0.5 * z).tanh()
                })
                .sum::<f64>()
                - m
        };
        let (mut lo, mut hi) = (b, b);
        while excess(lo) <= 0.0 && lo > f64::MIN_POSITIVE {
            lo *= 0.5;
        }
        while excess(hi) > 0.0 && hi < f64::MAX / 4.0 {
            hi *= 2.0;
        }
        b = bisect(lo, hi, excess);
        if grad_norm(&sums(x, a, b), m) < GRAD_TOL {
            break;
        }
    }
    (a, b)
}
