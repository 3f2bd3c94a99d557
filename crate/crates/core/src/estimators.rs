//! Point estimators of the net growth rate `r` from coalescence times.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::{fit_logistic, MleFit};
use crate::times::{BranchOrder, CoalescenceTimes};
use crate::tree::SampleTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mse,
    Bias,
    Inv,
    Lengths,
    Mle,
    /// Pairwise estimator with constant 1; the pivot behind the intervals.
    #[serde(rename = "raw")]
    RawUnitConstant,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mse,
        Method::Bias,
        Method::Inv,
        Method::Lengths,
        Method::Mle,
        Method::RawUnitConstant,
    ];

    /// Methods of the form `c(n) (n-1)(n-2) / sum |H_i - H_j|`.
    pub fn is_pairwise(self) -> bool {
        matches!(
            self,
            Method::Mse | Method::Bias | Method::Inv | Method::RawUnitConstant
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Mse => "mse",
            Method::Bias => "bias",
            Method::Inv => "inv",
            Method::Lengths => "lengths",
            Method::Mle => "mle",
            Method::RawUnitConstant => "raw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    pub point: f64,
    pub ci: Option<(f64, f64)>,
}

/// `sum_{i<j} |H_i - H_j|` for a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseStatistic {
    pub n: usize,
    pub d_sum: f64,
}

fn require_n(times: &CoalescenceTimes, min: usize) -> Result<usize> {
    let n = times.n();
    if n < min {
        return Err(Error::SampleTooSmall { n, min });
    }
    Ok(n)
}

/// Sum of absolute pairwise differences via the sorted-weights identity
/// `sum_{i<j} |x_i - x_j| = sum_k (2k - m + 1) x_(k)` (0-based, ascending).
pub fn pairwise_abs_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * k as f64 - m + 1.0) * x)
        .sum()
}

pub fn pairwise_statistic(times: &CoalescenceTimes) -> Result<PairwiseStatistic> {
    let n = require_n(times, 3)?;
    let d_sum = pairwise_abs_sum(times.times());
    if d_sum <= 0.0 {
        return Err(Error::DegenerateTimes);
    }
    Ok(PairwiseStatistic { n, d_sum })
}

/// `c (n-1)(n-2) / sum_{i<j} |H_i - H_j|`.
pub fn estimate_pairwise(times: &CoalescenceTimes, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParams(format!(
            "constant c = {c} must be positive"
        )));
    }
    let stat = pairwise_statistic(times)?;
    let n = stat.n as f64;
    Ok(c * ((n - 1.0) * (n - 2.0) / stat.d_sum))
}

/// Internal branch length of the point-process tree read off branch-ordered
/// heights: `(max H - H_1) + sum_{i=1}^{n-2} (H_i - H_{i+1})^+`.
pub fn internal_branch_length(times: &CoalescenceTimes) -> Result<f64> {
    require_n(times, 3)?;
    let h = times.times();
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let steps: f64 = h.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum();
    Ok((max - h[0]) + steps)
}

/// `n / L_in` from branch-ordered times.
pub fn estimate_lengths(times: &CoalescenceTimes) -> Result<f64> {
    if times.order() != BranchOrder::PointProcess {
        return Err(Error::InvalidParams(
            "branch order is unknown; use the tree's own internal branch length".into(),
        ));
    }
    let len = internal_branch_length(times)?;
    lengths_from_internal(times.n(), len)
}

/// `n / L_in` using the internal branch length of an actual tree topology.
pub fn estimate_lengths_tree(tree: &SampleTree) -> Result<f64> {
    let len = tree.internal_branch_length()?;
    lengths_from_internal(tree.n_tips(), len)
}

fn lengths_from_internal(n: usize, len: f64) -> Result<f64> {
    if len <= 0.0 {
        return Err(Error::DegenerateTimes);
    }
    Ok(n as f64 / len)
}

/// `1 / b` for the logistic location-scale fit `H_i = a + b U_i`.
pub fn estimate_mle(times: &CoalescenceTimes) -> Result<(Estimate, MleFit)> {
    require_n(times, 3)?;
    let fit = fit_logistic(times.times())?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            grad_norm: fit.grad_norm,
            location: fit.location,
            scale: fit.scale,
        });
    }
    let est = Estimate {
        method: Method::Mle,
        point: 1.0 / fit.scale,
        ci: None,
    };
    Ok((est, fit))
}
