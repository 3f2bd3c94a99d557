use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the times are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeAxis {
    /// Backwards from the sampling instant; values are coalescence depths.
    Absolute,
    /// Shifted by an unknown constant. Only differences are meaningful.
    Relative,
}

/// Whether `times[i]` is the height of branch `i + 1` of a coalescent point
/// process, or merely a sorted list with branch order unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchOrder {
    PointProcess,
    Descending,
}

/// The `n - 1` coalescence times of a sample of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceTimes {
    times: Vec<f64>,
    horizon: Option<f64>,
    axis: TimeAxis,
    order: BranchOrder,
}

impl CoalescenceTimes {
    /// Absolute-axis times in point-process branch order.
    pub fn new(times: Vec<f64>, horizon: Option<f64>) -> Result<Self> {
        Self::build(
            times,
            horizon,
            TimeAxis::Absolute,
            BranchOrder::PointProcess,
        )
    }

    pub fn relative(times: Vec<f64>) -> Result<Self> {
        Self::build(times, None, TimeAxis::Relative, BranchOrder::PointProcess)
    }

    /// Times read off a tree: sorted in decreasing order, branch order unknown.
    pub fn descending(mut times: Vec<f64>, horizon: Option<f64>) -> Result<Self> {
        times.sort_by(|a, b| b.total_cmp(a));
        Self::build(times, horizon, TimeAxis::Absolute, BranchOrder::Descending)
    }

    fn build(
        times: Vec<f64>,
        horizon: Option<f64>,
        axis: TimeAxis,
        order: BranchOrder,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::SampleTooSmall { n: 1, min: 2 });
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite coalescence time {t}"
            )));
        }
        if let Some(h) = horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "observation time {h} must be positive"
                )));
            }
        }
        Ok(Self {
            times,
            horizon,
            axis,
            order,
        })
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.times.len() + 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn axis(&self) -> TimeAxis {
        self.axis
    }

    pub fn order(&self) -> BranchOrder {
        self.order
    }

    /// True when every time lies strictly inside `(0, T)`, or is positive
    /// when no `T` is attached.
    pub fn within_support(&self) -> bool {
        self.axis == TimeAxis::Absolute
            && self
                .times
                .iter()
                .all(|&t| t > 0.0 && self.horizon.is_none_or(|h| t < h))
    }

    /// Same times, scaled by `k` (horizon scales too).
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t * k).collect(),
            horizon: self.horizon.map(|h| h * k),
            ..self.clone()
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t + c).collect(),
            horizon: self.horizon.map(|h| h + c),
            ..self.clone()
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            times: perm.iter().map(|&i| self.times[i]).collect(),
            ..self.clone()
        }
    }
}
