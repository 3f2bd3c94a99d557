//! Estimating the net growth rate of a supercritical birth-death process
//! from the coalescence times of a sample.
//!
//! The crate covers simulation of sample genealogies as coalescent point
//! processes, pairwise-difference and branch-length estimators, Monte Carlo
//! calibration of their constants, quantile-based confidence intervals and
//! Newick input.

pub mod calibration;
pub mod confidence;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod mle;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod times;
pub mod tree;

pub use calibration::{c_inv_closed_form, ConstantsRow, ConstantsTable, SnSample};
pub use confidence::ConfidenceSpec;
pub use error::{Error, Result};
pub use estimators::{Estimate, Method};
pub use sim::{sample_coalescence_times, BirthDeathParams, Regime};
pub use times::CoalescenceTimes;
pub use tree::SampleTree;
