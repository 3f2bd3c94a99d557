//! Per-`n` constants for the pairwise estimators.
//!
//! Every pairwise estimate has the form `r_hat = r c(n) S_n`, where the
//! pivot `S_n = (n-1)(n-2) / sum_{i<j} |U_i - U_j|` is built from the
//! fixed-`n` limit law and does not depend on `r`. The constants are
//! moments of `S_n`:
//!
//! * `c_mse = E[S] / E[S^2]` minimizes the mean squared error,
//! * `c_bias = 1 / E[S]` makes `r_hat` unbiased,
//! * `c_inv = E[1/S]` makes `1 / r_hat` unbiased, and has a closed form.
//!
//! The 2.5% and 97.5% quantiles of `S_n` give the confidence intervals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::pairwise_abs_sum;
use crate::rng::{derive_seed, open_uniform, replicate};
use crate::sim::{sample_logistic, sample_q, u_given_q_quantile};
use crate::stats::{mean, quantile_sorted, sorted, std_error};

pub const DEFAULT_REPLICATES: usize = 1_000_000;
pub const MIN_QUANTILE_REPLICATES: usize = 10_000;
pub const MIN_MOMENT_REPLICATES: usize = 1_000_000;

const TABLE_FORMAT: &str = "v1";
const TABLE_COLUMNS: &str = "n,c_inv,c_mse,c_bias,inv_q_lo,inv_q_hi,replicates,seed";

/// `c_inv(n) = n/(n-2) (1 - H_{n-1}/(n-1))`, with `H_k` the harmonic number.
pub fn c_inv_closed_form(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    let harmonic: f64 = (1..n).map(|k| 1.0 / k as f64).sum();
    let nf = n as f64;
    Ok(nf / (nf - 2.0) * (1.0 - harmonic / (nf - 1.0)))
}

/// Draws of the pivot `S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnSample {
    pub n: usize,
    pub values: Vec<f64>,
}

/// One draw of `S_n`: `Q_n`, then `n - 1` conditionally i.i.d. `U_{i,n}`.
pub fn draw_sn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    let pairs = ((n - 1) * (n - 2)) as f64;
    loop {
        let q = sample_q(n, rng);
        let us: Vec<f64> = (0..n - 1)
            .map(|_| u_given_q_quantile(q, open_uniform(rng)))
            .collect();
        let d = pairwise_abs_sum(&us);
        if d > 0.0 {
            return pairs / d;
        }
    }
}

pub fn sample_sn(n: usize, replicates: usize, seed: u64) -> Result<SnSample> {
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    if replicates == 0 {
        return Err(Error::InsufficientReplicates { got: 0, need: 1 });
    }
    let values = replicate(seed, replicates, |rng| draw_sn(n, rng));
    Ok(SnSample { n, values })
}

impl SnSample {
    /// `E[S] / E[S^2]` from sample moments.
    pub fn c_mse(&self) -> f64 {
        let m1 = mean(&self.values);
        let m2 = self.values.iter().map(|s| s * s).sum::<f64>() / self.values.len() as f64;
        m1 / m2
    }

    pub fn c_bias(&self) -> f64 {
        1.0 / mean(&self.values)
    }

    /// Monte Carlo `E[1/S]` and its standard error.
    pub fn c_inv_estimate(&self) -> (f64, f64) {
        let inv: Vec<f64> = self.values.iter().map(|s| 1.0 / s).collect();
        (mean(&inv), std_error(&inv))
    }

    /// Quantiles of `S_n` at `(1 - level)/2` and `(1 + level)/2`.
    pub fn quantiles(&self, level: f64) -> Result<(f64, f64)> {
        if self.values.len() < MIN_QUANTILE_REPLICATES {
            return Err(Error::InsufficientReplicates {
                got: self.values.len(),
                need: MIN_QUANTILE_REPLICATES,
            });
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParams(format!(
                "level {level} must lie in (0, 1)"
            )));
        }
        let s = sorted(&self.values);
        Ok((
            quantile_sorted(&s, 0.5 * (1.0 - level)),
            quantile_sorted(&s, 0.5 * (1.0 + level)),
        ))
    }

    /// `(q_0.025, q_0.975)`.
    pub fn sn_quantiles(&self) -> Result<(f64, f64)> {
        self.quantiles(0.95)
    }
}

/// Monte Carlo moments of positive parts of differences of i.i.d. standard
/// logistic variables, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub replicates: usize,
    /// `E[(U1-U2)^+]`, expected 1
    pub pos: (f64, f64),
    /// `E[((U1-U2)^+)^2]`, expected pi^2/3
    pub pos_sq: (f64, f64),
    /// `E[(U1-U2)^+ (U2-U3)^+]`, expected 2 - pi^2/6
    pub chain: (f64, f64),
    /// `E[(U1-U2)^+ (U1-U3)^+]`, expected 2
    pub fork: (f64, f64),
}

pub fn moment_identities_check(replicates: usize, seed: u64) -> Result<MomentReport> {
    if replicates < MIN_MOMENT_REPLICATES {
        return Err(Error::InsufficientReplicates {
            got: replicates,
            need: MIN_MOMENT_REPLICATES,
        });
    }
    let draws = replicate(seed, replicates, |rng| {
        let (u1, u2, u3) = (
            sample_logistic(rng),
            sample_logistic(rng),
            sample_logistic(rng),
        );
        let d12 = (u1 - u2).max(0.0);
        let d23 = (u2 - u3).max(0.0);
        let d13 = (u1 - u3).max(0.0);
        [d12, d12 * d12, d12 * d23, d12 * d13]
    });
    let column = |k: usize| {
        let v: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        (mean(&v), std_error(&v))
    };
    Ok(MomentReport {
        replicates,
        pos: column(0),
        pos_sq: column(1),
        chain: column(2),
        fork: column(3),
    })
}

/// Calibration record for one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsRow {
    pub n: usize,
    pub c_inv: f64,
    pub c_mse: f64,
    pub c_bias: f64,
    /// `1 / q_0.025`
    pub inv_q_lo: f64,
    /// `1 / q_0.975`
    pub inv_q_hi: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ConstantsRow {
    pub fn q_lo(&self) -> f64 {
        1.0 / self.inv_q_lo
    }

    pub fn q_hi(&self) -> f64 {
        1.0 / self.inv_q_hi
    }
}

/// Seed actually used for the `S_n` draws of row `n`.
pub fn row_seed(seed: u64, n: usize) -> u64 {
    derive_seed(seed, &[n as u64])
}

pub fn build_constants_row(n: usize, replicates: usize, seed: u64) -> Result<ConstantsRow> {
    let c_inv = c_inv_closed_form(n)?;
    let sample = sample_sn(n, replicates, row_seed(seed, n))?;
    let (q_lo, q_hi) = sample.sn_quantiles()?;
    Ok(ConstantsRow {
        n,
        c_inv,
        c_mse: sample.c_mse(),
        c_bias: sample.c_bias(),
        inv_q_lo: 1.0 / q_lo,
        inv_q_hi: 1.0 / q_hi,
        replicates,
        seed,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantsTable {
    rows: Vec<ConstantsRow>,
}

pub fn build_constants_table(ns: &[usize], replicates: usize, seed: u64) -> Result<ConstantsTable> {
    let mut table = ConstantsTable::default();
    for &n in ns {
        table.insert(build_constants_row(n, replicates, seed)?);
    }
    Ok(table)
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ConstantsTable {
    pub fn rows(&self) -> &[ConstantsRow] {
        &self.rows
    }

    pub fn get(&self, n: usize) -> Option<&ConstantsRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Inserts or replaces the row for `row.n`, keeping rows sorted by `n`.
    pub fn insert(&mut self, row: ConstantsRow) {
        match self.rows.binary_search_by_key(&row.n, |r| r.n) {
            Ok(i) => self.rows[i] = row,
            Err(i) => self.rows.insert(i, row),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# growthrate constants {TABLE_FORMAT} code={}\n{TABLE_COLUMNS}\n",
            env!("CARGO_PKG_VERSION")
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                fmt17(r.c_inv),
                fmt17(r.c_mse),
                fmt17(r.c_bias),
                fmt17(r.inv_q_lo),
                fmt17(r.inv_q_hi),
                r.replicates,
                r.seed
            );
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Format {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.starts_with("# growthrate constants ") => {
                let version = h.split_whitespace().nth(3).unwrap_or("");
                if version != TABLE_FORMAT {
                    return Err(bad(1, format!("unsupported table format '{version}'")));
                }
            }
            _ => return Err(bad(1, "missing constants table header".into())),
        }
        match lines.next() {
            Some((_, c)) if c.trim() == TABLE_COLUMNS => {}
            _ => return Err(bad(2, format!("expected column line '{TABLE_COLUMNS}'"))),
        }
        let mut table = ConstantsTable::default();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad(
                    line_no,
                    format!("expected 8 fields, found {}", f.len()),
                ));
            }
            let float = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|e| bad(line_no, format!("field {}: {e}", k + 1)))
            };
            let int = |k: usize| {
                f[k].parse::<u64>()
                    .map_err(|e| bad(line_no, format!("field {}: {e}", k + 1)))
            };
            table.insert(ConstantsRow {
                n: int(0)? as usize,
                c_inv: float(1)?,
                c_mse: float(2)?,
                c_bias: float(3)?,
                inv_q_lo: float(4)?,
                inv_q_hi: float(5)?,
                replicates: int(6)? as usize,
                seed: int(7)?,
            });
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
