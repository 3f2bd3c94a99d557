//! Coalescence times of a sample from a supercritical birth-death process.
//!
//! Three laws are available. [`Regime::ExactFiniteT`] is the exact
//! genealogy of `n` individuals sampled at time `T`: a mixing variable `Y`
//! followed by `n - 1` conditionally i.i.d. heights. [`Regime::FixedNLimit`]
//! is its limit as `T -> inf` with `n` fixed (mixing variable `Q`, heights
//! through a truncated logistic `U | Q`), and [`Regime::LargeN`] is the
//! further limit as `n -> inf` (exponential `W`, standard logistic `U`).
//!
//! Every sampler is an explicit inverse-CDF map from open uniforms, exposed
//! as a `*_quantile` function so the transforms can be checked directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open_uniform;
use crate::times::CoalescenceTimes;
use crate::tree::SampleTree;

/// Birth rate, death rate and observation time of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathParams {
    lambda: f64,
    mu: f64,
    horizon: f64,
}

impl BirthDeathParams {
    pub fn new(lambda: f64, mu: f64, horizon: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite() && horizon.is_finite()) {
            return Err(Error::InvalidParams("rates and T must be finite".into()));
        }
        if !(mu >= 0.0 && lambda > mu) {
            return Err(Error::InvalidParams(format!(
                "need lambda > mu >= 0 (got lambda = {lambda}, mu = {mu})"
            )));
        }
        if horizon < 0.0 {
            return Err(Error::InvalidParams(format!(
                "T = {horizon} must be non-negative"
            )));
        }
        Ok(Self {
            lambda,
            mu,
            horizon,
        })
    }

    /// Pure-birth process (mu = 0) with net growth rate `r`.
    pub fn yule(r: f64, horizon: f64) -> Result<Self> {
        Self::new(r, 0.0, horizon)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Net growth rate `lambda - mu`.
    pub fn r(&self) -> f64 {
        self.lambda - self.mu
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `delta_T = r e^{-rT} / (lambda (1 - e^{-rT}) + r e^{-rT})`.
    ///
    /// The denominator equals `lambda - mu e^{-rT}`, which stays away from
    /// zero; the result is floored at the smallest positive subnormal when
    /// `e^{-rT}` underflows.
    pub fn delta(&self) -> f64 {
        let r = self.r();
        let log_delta =
            r.ln() - r * self.horizon - (self.lambda - self.mu * (-r * self.horizon).exp()).ln();
        log_delta.exp().max(f64::from_bits(1)).min(1.0)
    }
}

/// Which law to draw coalescence times from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    ExactFiniteT(BirthDeathParams),
    /// `horizon = None` returns times on a relative axis.
    FixedNLimit {
        r: f64,
        horizon: Option<f64>,
    },
    /// `horizon` only positions the times on the absolute axis.
    LargeN {
        r: f64,
        horizon: f64,
    },
}

impl Regime {
    pub fn r(&self) -> f64 {
        match *self {
            Regime::ExactFiniteT(p) => p.r(),
            Regime::FixedNLimit { r, .. } | Regime::LargeN { r, .. } => r,
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        match *self {
            Regime::ExactFiniteT(p) => Some(p.horizon()),
            Regime::FixedNLimit { horizon, .. } => horizon,
            Regime::LargeN { horizon, .. } => Some(horizon),
        }
    }

    fn validate(&self) -> Result<()> {
        let r = self.r();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParams(format!(
                "growth rate r = {r} must be positive"
            )));
        }
        if let Some(h) = self.horizon() {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParams(format!("T = {h} must be positive")));
            }
        }
        Ok(())
    }
}

/// `u^{1/n}` and `1 - u^{1/n}`, the latter without cancellation.
fn root_and_complement(u: f64, n: usize) -> (f64, f64) {
    let x = u.ln() / n as f64;
    (x.exp(), -x.exp_m1())
}

/// Inverse of `F(y) = (y / (y + delta (1 - y)))^n` on `(0, 1)`.
pub fn y_quantile(n: usize, delta: f64, u: f64) -> f64 {
    let (v, w) = root_and_complement(u, n);
    v * delta / (w + v * delta)
}

pub fn y_cdf(n: usize, delta: f64, y: f64) -> f64 {
    (y / (y + delta * (1.0 - y))).powi(n as i32)
}

/// Density of the mixing variable `Y_{n,T}`.
pub fn y_density(n: usize, delta: f64, y: f64) -> f64 {
    n as f64 * delta * y.powi(n as i32 - 1) / (y + delta - y * delta).powi(n as i32 + 1)
}

pub fn sample_y<R: Rng + ?Sized>(n: usize, delta: f64, rng: &mut R) -> f64 {
    y_quantile(n, delta, open_uniform(rng))
}

/// Conditional law of one coalescence time given the mixing variable,
/// parametrized by `z = y / delta` so it stays finite when `e^{-rT}`
/// underflows.
///
/// With `eps = e^{-rT}`, `a = y lambda = eps * a_scaled` and
/// `b = r - a`, the conditional CDF on `(0, T)` is
/// `F(t) = (1 - e^{-rt}) (a + b eps) / ((a + b e^{-rt}) (1 - eps))`.
#[derive(Debug, Clone, Copy)]
struct ScaledHeightLaw {
    r: f64,
    horizon: f64,
    eps: f64,
    a_scaled: f64,
}

impl ScaledHeightLaw {
    fn new(params: &BirthDeathParams, z: f64) -> Self {
        let r = params.r();
        let eps = (-r * params.horizon).exp();
        let a_scaled = z * params.lambda * r / (params.lambda - params.mu * eps);
        Self {
            r,
            horizon: params.horizon,
            eps,
            a_scaled,
        }
    }

    /// Solves `F(t) = u`. Writing `x = r (T - t)`,
    /// `x = ln(a' (1 - u) + r / (1 - eps)) - ln(u r + eps a' (1 - u) + eps r / (1 - eps))`,
    /// where every term is non-negative.
    fn quantile(&self, u: f64) -> f64 {
        let Self {
            r,
            horizon,
            eps,
            a_scaled,
        } = *self;
        let w = 1.0 - u;
        let top = a_scaled * w + r / (1.0 - eps);
        let bottom = u * r + eps * a_scaled * w + eps * r / (1.0 - eps);
        let t = horizon - (top.ln() - bottom.ln()) / r;
        t.clamp(f64::MIN_POSITIVE, horizon.next_down())
    }
}

/// Inverse of the conditional CDF of `H_{i,n,T}` given `Y_{n,T} = y`.
pub fn h_exact_quantile(y: f64, params: &BirthDeathParams, u: f64) -> f64 {
    ScaledHeightLaw::new(params, y / params.delta()).quantile(u)
}

/// Conditional CDF of `H_{i,n,T}` given `Y_{n,T} = y`, evaluated directly.
///
/// This is the cancelled form of `C (a r / b) (1/(a + b e^{-rt}) - 1/r)`;
/// it has no singularity at `b = r - y lambda = 0`.
pub fn h_exact_cdf(t: f64, y: f64, params: &BirthDeathParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= params.horizon {
        return 1.0;
    }
    let r = params.r();
    let a = y * params.lambda;
    let b = r - a;
    let et = (-r * t).exp();
    let e_big = (-r * params.horizon).exp();
    (-(-r * t).exp_m1()) * (a + b * e_big) / ((a + b * et) * (-(-r * params.horizon).exp_m1()))
}

/// Conditional density of `H_{i,n,T}` given `Y_{n,T} = y`:
/// `C a r^2 e^{-rt} / (a + b e^{-rt})^2`.
pub fn h_exact_density(t: f64, y: f64, params: &BirthDeathParams) -> f64 {
    let r = params.r();
    let a = y * params.lambda;
    let b = r - a;
    let e_big = (-r * params.horizon).exp();
    let c = (a + b * e_big) / (a * (1.0 - e_big));
    let et = (-r * t).exp();
    c * a * r * r * et / (a + b * et).powi(2)
}

pub fn sample_h_exact<R: Rng + ?Sized>(y: f64, params: &BirthDeathParams, rng: &mut R) -> f64 {
    h_exact_quantile(y, params, open_uniform(rng))
}

/// Inverse of `G(q) = (q / (1 + q))^n` on `(0, inf)`.
pub fn q_quantile(n: usize, u: f64) -> f64 {
    let (v, w) = root_and_complement(u, n);
    v / w
}

pub fn q_cdf(n: usize, q: f64) -> f64 {
    (q / (1.0 + q)).powi(n as i32)
}

pub fn q_density(n: usize, q: f64) -> f64 {
    n as f64 * q.powi(n as i32 - 1) / (1.0 + q).powi(n as i32 + 1)
}

pub fn sample_q<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    q_quantile(n, open_uniform(rng))
}

/// `log q + U` for `U ~ U | Q = q`; always positive. This is the quantity
/// that enters the coalescence time, computed without forming `U`.
fn shifted_u_quantile(q: f64, v: f64) -> f64 {
    (q * v).ln_1p() - (-v).ln_1p()
}

/// Inverse of `F(u) = 1 - (1 + q) / (q (1 + e^u))` on `(-log q, inf)`.
pub fn u_given_q_quantile(q: f64, v: f64) -> f64 {
    shifted_u_quantile(q, v) - q.ln()
}

pub fn u_given_q_cdf(q: f64, u: f64) -> f64 {
    if u <= -q.ln() {
        return 0.0;
    }
    1.0 - (1.0 + q) / (q * (1.0 + u.exp()))
}

pub fn u_given_q_density(q: f64, u: f64) -> f64 {
    if u <= -q.ln() {
        return 0.0;
    }
    (1.0 + q) / q * logistic_density(u)
}

pub fn sample_u_given_q<R: Rng + ?Sized>(q: f64, rng: &mut R) -> f64 {
    u_given_q_quantile(q, open_uniform(rng))
}

pub fn logistic_quantile(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_density(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub fn sample_logistic<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    logistic_quantile(open_uniform(rng))
}

/// Large-`n` heights `H_i = T - (log(1/W) + log n + U_i) / r`.
pub fn large_n_times(n: usize, r: f64, horizon: f64, w: f64, logistic: &[f64]) -> Vec<f64> {
    let shift = -w.ln() + (n as f64).ln();
    logistic.iter().map(|u| horizon - (shift + u) / r).collect()
}

/// Draws the `n - 1` coalescence times of a sample of size `n`.
///
/// The returned times are in point-process branch order (the order drawn).
pub fn sample_coalescence_times<R: Rng + ?Sized>(
    n: usize,
    regime: &Regime,
    rng: &mut R,
) -> Result<CoalescenceTimes> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    regime.validate()?;
    let m = n - 1;
    match *regime {
        Regime::ExactFiniteT(params) => {
            let (v, w) = root_and_complement(open_uniform(rng), n);
            let z = v / (w + v * params.delta());
            let law = ScaledHeightLaw::new(&params, z);
            let times = (0..m).map(|_| law.quantile(open_uniform(rng))).collect();
            CoalescenceTimes::new(times, Some(params.horizon))
        }
        Regime::FixedNLimit { r, horizon } => {
            let q = sample_q(n, rng);
            let offsets = (0..m).map(|_| shifted_u_quantile(q, open_uniform(rng)) / r);
            match horizon {
                Some(h) => CoalescenceTimes::new(offsets.map(|x| h - x).collect(), Some(h)),
                None => CoalescenceTimes::relative(offsets.map(|x| -x).collect()),
            }
        }
        Regime::LargeN { r, horizon } => {
            let w = -open_uniform(rng).ln();
            let us: Vec<f64> = (0..m).map(|_| sample_logistic(rng)).collect();
            CoalescenceTimes::new(large_n_times(n, r, horizon, w, &us), Some(horizon))
        }
    }
}

/// Coalescent-point-process tree: a vertical line of height `T` followed by
/// lines of heights `H_1, ..., H_{n-1}`, each joined leftward at its top to
/// the first taller line.
pub fn build_cpp_tree(times: &CoalescenceTimes) -> Result<SampleTree> {
    let horizon = match (times.axis(), times.horizon()) {
        (crate::times::TimeAxis::Absolute, Some(h)) => h,
        _ => return Err(Error::RelativeAxis),
    };
    if !times.within_support() {
        return Err(Error::InvalidParams(
            "point-process tree needs every coalescence time inside (0, T)".into(),
        ));
    }
    SampleTree::from_point_process(times.times(), horizon)
}
