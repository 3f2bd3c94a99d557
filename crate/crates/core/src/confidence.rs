//! Quantile-calibrated confidence intervals for `r`.
//!
//! With `c = 1` the pairwise estimate is `r_hat = r S_n`, so
//! `P(r_hat / q_hi < r < r_hat / q_lo) = level` whenever `q_lo`, `q_hi` are
//! the matching quantiles of `S_n`.

use crate::calibration::{ConstantsRow, SnSample};
use crate::error::{Error, Result};
use crate::estimators::estimate_pairwise;
use crate::rng::replicate;
use crate::sim::{sample_coalescence_times, Regime};
use crate::times::CoalescenceTimes;

pub const MIN_COVERAGE_REPLICATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSpec {
    pub n: usize,
    pub level: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl ConfidenceSpec {
    pub fn new(n: usize, level: f64, q_lo: f64, q_hi: f64) -> Result<Self> {
        if !(q_lo > 0.0 && q_lo < q_hi && q_hi.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need 0 < q_lo < q_hi (got {q_lo}, {q_hi})"
            )));
        }
        Ok(Self {
            n,
            level,
            q_lo,
            q_hi,
        })
    }

    /// 95% interval from a calibration row.
    pub fn from_row(row: &ConstantsRow) -> Result<Self> {
        Self::new(row.n, 0.95, row.q_lo(), row.q_hi())
    }

    pub fn from_sample(sample: &SnSample, level: f64) -> Result<Self> {
        let (lo, hi) = sample.quantiles(level)?;
        Self::new(sample.n, level, lo, hi)
    }

    /// Interval for a raw (`c = 1`) estimate.
    pub fn interval(&self, raw: f64) -> (f64, f64) {
        (raw / self.q_hi, raw / self.q_lo)
    }
}

pub fn confidence_interval(times: &CoalescenceTimes, spec: &ConfidenceSpec) -> Result<(f64, f64)> {
    if times.n() != spec.n {
        return Err(Error::MismatchedN {
            expected: spec.n,
            got: times.n(),
        });
    }
    Ok(spec.interval(estimate_pairwise(times, 1.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub covered: usize,
    pub replicates: usize,
    /// Replicates dropped because all times coincided.
    pub excluded: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.covered as f64 / (self.replicates - self.excluded) as f64
    }
}

/// Fraction of simulated samples whose interval contains the true `r`.
pub fn coverage_study(
    spec: &ConfidenceSpec,
    regime: &Regime,
    replicates: usize,
    seed: u64,
) -> Result<Coverage> {
    if replicates < MIN_COVERAGE_REPLICATES {
        return Err(Error::InsufficientReplicates {
            got: replicates,
            need: MIN_COVERAGE_REPLICATES,
        });
    }
    let r = regime.r();
    let n = spec.n;
    let outcomes = replicate(seed, replicates, |rng| {
        let times = sample_coalescence_times(n, regime, rng)?;
        match confidence_interval(&times, spec) {
            Ok((lo, hi)) => Ok(Some(lo < r && r < hi)),
            Err(Error::DegenerateTimes) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut cov = Coverage {
        covered: 0,
        replicates,
        excluded: 0,
    };
    for o in outcomes {
        match o? {
            Some(true) => cov.covered += 1,
            Some(false) => {}
            None => cov.excluded += 1,
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_spec(n: usize, inv_lo: f64, inv_hi: f64) -> ConfidenceSpec {
        ConfidenceSpec::new(n, 0.95, 1.0 / inv_lo, 1.0 / inv_hi).unwrap()
    }

    #[test]
    fn interval_from_reciprocals() {
        let (lo, hi) = table_spec(10, 1.43, 0.44).interval(1.0);
        assert!((lo - 0.44).abs() < 1e-12 && (hi - 1.43).abs() < 1e-12);
        let (lo, hi) = table_spec(5, 1.73, 0.21).interval(2.0);
        assert!((lo - 0.42).abs() < 1e-12 && (hi - 3.46).abs() < 1e-12);
    }

    #[test]
    fn interval_is_linear_and_ordered() {
        let spec = table_spec(7, 1.53, 0.32);
        let (l1, u1) = spec.interval(0.8);
        let (l2, u2) = spec.interval(2.4);
        assert!(l1 < u1);
        assert!((l2 - 3.0 * l1).abs() < 1e-12 && (u2 - 3.0 * u1).abs() < 1e-12);
    }

    #[test]
    fn equivariance_under_time_scaling() {
        let spec = table_spec(4, 1.9, 0.15);
        let t = CoalescenceTimes::new(vec![3.0, 1.0, 2.0], None).unwrap();
        let (l, u) = confidence_interval(&t, &spec).unwrap();
        let (ls, us) = confidence_interval(&t.scaled(2.0), &spec).unwrap();
        assert!((ls - l / 2.0).abs() < 1e-12 && (us - u / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_n() {
        let spec = table_spec(10, 1.43, 0.44);
        let t = CoalescenceTimes::new(vec![3.0, 1.0, 2.0], None).unwrap();
        assert!(matches!(
            confidence_interval(&t, &spec),
            Err(Error::MismatchedN {
                expected: 10,
                got: 4
            })
        ));
    }

    #[test]
    fn rejects_bad_quantiles() {
        assert!(ConfidenceSpec::new(5, 0.95, 2.0, 1.0).is_err());
        assert!(ConfidenceSpec::new(5, 0.95, 0.0, 1.0).is_err());
    }

    #[test]
    fn coverage_needs_replicates() {
        let spec = table_spec(5, 1.73, 0.21);
        let regime = Regime::FixedNLimit {
            r: 1.0,
            horizon: None,
        };
        assert!(coverage_study(&spec, &regime, 999, 1).is_err());
    }
}
