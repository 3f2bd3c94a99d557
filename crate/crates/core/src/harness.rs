//! Reproducible simulation experiments: the estimator comparison study, the
//! constant sweep, the large-`n` variance check and coverage runs.
//!
//! Every experiment is a pure function of its config and seed. Cells of a
//! study grid get their own derived seed, and replicate loops go through
//! [`crate::rng::replicate`], so outputs are byte-stable across runs and
//! thread counts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibration::{build_constants_row, c_inv_closed_form, ConstantsRow, ConstantsTable};
use crate::confidence::{coverage_study, ConfidenceSpec};
use crate::error::{Error, Result};
use crate::estimators::{estimate_lengths, estimate_pairwise, Estimate, Method};
use crate::mle::fit_logistic;
use crate::rng::{derive_seed, replicate};
use crate::sim::{sample_coalescence_times, BirthDeathParams, Regime};
use crate::stats::{kolmogorov_pvalue, ks_statistic, mean, quantile_sorted, sorted, variance};
use crate::times::CoalescenceTimes;

pub const DENSITY_BINS: usize = 256;

/// The five estimators compared in the study.
pub const STUDY_METHODS: [Method; 5] = [
    Method::Mse,
    Method::Bias,
    Method::Inv,
    Method::Lengths,
    Method::Mle,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    Exact,
    FixedN,
    LargeN,
}

impl RegimeKind {
    /// `death_rate` only matters for the exact regime, where the birth rate
    /// is `r + death_rate`.
    pub fn regime(self, r: f64, horizon: f64, death_rate: f64) -> Result<Regime> {
        Ok(match self {
            RegimeKind::Exact => {
                Regime::ExactFiniteT(BirthDeathParams::new(r + death_rate, death_rate, horizon)?)
            }
            RegimeKind::FixedN => Regime::FixedNLimit {
                r,
                horizon: Some(horizon),
            },
            RegimeKind::LargeN => Regime::LargeN { r, horizon },
        })
    }
}

/// Point estimate for one method, using `row` for the pairwise constants.
///
/// The MLE falls back to its best iterate when Newton and bisection both
/// stall, so a study never silently drops those replicates.
pub fn evaluate(
    method: Method,
    times: &CoalescenceTimes,
    row: Option<&ConstantsRow>,
) -> Result<f64> {
    let constant = |pick: fn(&ConstantsRow) -> f64| {
        row.map(pick)
            .ok_or(Error::MissingConstants { n: times.n() })
    };
    match method {
        Method::Mse => estimate_pairwise(times, constant(|r| r.c_mse)?),
        Method::Bias => estimate_pairwise(times, constant(|r| r.c_bias)?),
        Method::Inv => estimate_pairwise(times, c_inv_closed_form(times.n())?),
        Method::RawUnitConstant => estimate_pairwise(times, 1.0),
        Method::Lengths => estimate_lengths(times),
        Method::Mle => {
            if times.n() < 3 {
                return Err(Error::SampleTooSmall {
                    n: times.n(),
                    min: 3,
                });
            }
            Ok(1.0 / fit_logistic(times.times())?.scale)
        }
    }
}

/// Estimate for one method, with the 95% interval attached to pairwise
/// methods when `row` is available.
pub fn estimate(
    method: Method,
    times: &CoalescenceTimes,
    row: Option<&ConstantsRow>,
) -> Result<Estimate> {
    let point = evaluate(method, times, row)?;
    let ci = match (method.is_pairwise(), row) {
        (true, Some(row)) => {
            let spec = ConfidenceSpec::from_row(row)?;
            Some(spec.interval(estimate_pairwise(times, 1.0)?))
        }
        _ => None,
    };
    Ok(Estimate { method, point, ci })
}

/// Adds any missing rows for `ns`, computing them with `replicates` draws.
pub fn ensure_constants(
    table: &mut ConstantsTable,
    ns: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<()> {
    for &n in ns {
        if table.get(n).is_none() {
            log::warn!("no constants for n = {n}; calibrating with {replicates} replicates");
            table.insert(build_constants_row(n, replicates, seed)?);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub ns: Vec<usize>,
    pub rs: Vec<f64>,
    pub horizon: f64,
    pub regime: RegimeKind,
    /// Death rate for the exact regime.
    pub death_rate: f64,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub out_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            ns: vec![5, 6, 7, 8, 9, 10, 15, 20, 50],
            rs: vec![0.5, 1.0],
            horizon: 40.0,
            regime: RegimeKind::Exact,
            death_rate: 0.0,
            replicates: 10_000,
            seed: 1,
            methods: STUDY_METHODS.to_vec(),
            out_dir: None,
        }
    }
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InsufficientReplicates { got: 0, need: 1 });
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 3) {
            return Err(Error::SampleTooSmall { n, min: 3 });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParams("no estimators selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: Method,
    pub n: usize,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub mse: f64,
    pub mae: f64,
    pub bias: f64,
    /// Population variance of the estimates; `mse = variance + bias^2`.
    pub variance: f64,
    pub replicates: usize,
    pub excluded: usize,
}

impl MetricsRow {
    pub fn from_estimates(
        estimator: Method,
        n: usize,
        r: f64,
        horizon: f64,
        xs: &[f64],
        excluded: usize,
    ) -> Self {
        let m = xs.len() as f64;
        let avg = mean(xs);
        Self {
            estimator,
            n,
            r,
            horizon,
            mse: xs.iter().map(|x| (x - r).powi(2)).sum::<f64>() / m,
            mae: xs.iter().map(|x| (x - r).abs()).sum::<f64>() / m,
            bias: avg - r,
            variance: xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / m,
            replicates: xs.len(),
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub estimator: Method,
    pub n: usize,
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// Histogram density over the central 99% of the estimates.
pub fn density_bins(estimator: Method, n: usize, r: f64, xs: &[f64]) -> Vec<DensityBin> {
    let s = sorted(xs);
    let lo = quantile_sorted(&s, 0.005);
    let mut hi = quantile_sorted(&s, 0.995);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / DENSITY_BINS as f64;
    let mut counts = vec![0usize; DENSITY_BINS];
    for &x in &s {
        if x >= lo && x <= hi {
            let k = (((x - lo) / width) as usize).min(DENSITY_BINS - 1);
            counts[k] += 1;
        }
    }
    let total = xs.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| DensityBin {
            estimator,
            n,
            r,
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            density: c as f64 / (total * width),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub level: f64,
    pub coverage: f64,
    pub replicates: usize,
    pub excluded: usize,
}

/// Qualitative checks for one `(n, r)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFindings {
    pub n: usize,
    pub r: f64,
    pub min_mse: Method,
    pub min_mae: Method,
    /// `|bias(r_hat_bias)| / r`, when the bias-calibrated estimator ran.
    pub bias_estimator_rel_bias: Option<f64>,
}

impl CellFindings {
    pub fn mse_estimator_wins_mse(&self) -> bool {
        self.min_mse == Method::Mse
    }

    pub fn bias_estimator_wins_mae(&self) -> bool {
        self.min_mae == Method::Bias
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyReport {
    pub metrics: Vec<MetricsRow>,
    pub densities: Vec<DensityBin>,
    pub coverage: Vec<CoverageRow>,
    pub findings: Vec<CellFindings>,
    /// Raw estimates per cell and method, in replicate order.
    pub estimates: BTreeMap<(usize, u64), BTreeMap<Method, Vec<f64>>>,
}

struct Outcome {
    values: Vec<f64>,
    covered: bool,
}

fn cell_seed(seed: u64, n: usize, r: f64) -> u64 {
    derive_seed(seed, &[n as u64, r.to_bits()])
}

pub fn run_study(config: &StudyConfig, constants: &ConstantsTable) -> Result<StudyReport> {
    config.validate()?;
    let mut report = StudyReport::default();
    for &n in &config.ns {
        let row = constants.get(n).ok_or(Error::MissingConstants { n })?;
        let spec = ConfidenceSpec::from_row(row)?;
        for &r in &config.rs {
            let regime = config.regime.regime(r, config.horizon, config.death_rate)?;
            let outcomes = replicate(cell_seed(config.seed, n, r), config.replicates, |rng| {
                let times = sample_coalescence_times(n, &regime, rng)?;
                let mut values = Vec::with_capacity(config.methods.len());
                for &m in &config.methods {
                    match evaluate(m, &times, Some(row)) {
                        Ok(v) => values.push(v),
                        Err(Error::DegenerateTimes) => return Ok(None),
                        Err(e) => return Err(e),
                    }
                }
                let (lo, hi) = spec.interval(estimate_pairwise(&times, 1.0)?);
                Ok(Some(Outcome {
                    values,
                    covered: lo < r && r < hi,
                }))
            });

            let mut excluded = 0;
            let mut covered = 0;
            let mut per_method: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
            for o in outcomes {
                match o? {
                    None => excluded += 1,
                    Some(o) => {
                        covered += o.covered as usize;
                        for (&m, v) in config.methods.iter().zip(o.values) {
                            per_method.entry(m).or_default().push(v);
                        }
                    }
                }
            }
            if excluded > 0 {
                log::warn!("n = {n}, r = {r}: excluded {excluded} degenerate replicates");
            }
            let used = config.replicates - excluded;
            if used == 0 {
                return Err(Error::DegenerateTimes);
            }

            let mut cell_metrics = Vec::new();
            for &m in &config.methods {
                let xs = &per_method[&m];
                cell_metrics.push(MetricsRow::from_estimates(
                    m,
                    n,
                    r,
                    config.horizon,
                    xs,
                    excluded,
                ));
                report.densities.extend(density_bins(m, n, r, xs));
            }
            let best = |key: fn(&MetricsRow) -> f64| {
                cell_metrics
                    .iter()
                    .filter(|row| STUDY_METHODS.contains(&row.estimator))
                    .min_by(|a, b| key(a).total_cmp(&key(b)))
                    .map(|row| row.estimator)
                    .unwrap_or(config.methods[0])
            };
            report.findings.push(CellFindings {
                n,
                r,
                min_mse: best(|m| m.mse),
                min_mae: best(|m| m.mae),
                bias_estimator_rel_bias: cell_metrics
                    .iter()
                    .find(|m| m.estimator == Method::Bias)
                    .map(|m| m.bias.abs() / r),
            });
            report.metrics.extend(cell_metrics);
            report.coverage.push(CoverageRow {
                n,
                r,
                horizon: config.horizon,
                level: spec.level,
                coverage: covered as f64 / used as f64,
                replicates: used,
                excluded,
            });
            report.estimates.insert((n, r.to_bits()), per_method);
        }
    }
    Ok(report)
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Format {
            path: path.clone(),
            line: 0,
            msg: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

impl StudyReport {
    /// Writes `metrics.csv`, `density.csv`, `coverage.csv` and `findings.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(vec![
            write_csv(dir, "metrics.csv", &self.metrics)?,
            write_csv(dir, "density.csv", &self.densities)?,
            write_csv(dir, "coverage.csv", &self.coverage)?,
            write_csv(dir, "findings.csv", &self.findings)?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub r: f64,
    pub horizon: f64,
    pub regime: RegimeKind,
    pub death_rate: f64,
    pub grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

impl SweepConfig {
    /// `c` from 0.05 to 1.5 in steps of 0.005.
    pub fn default_grid() -> Vec<f64> {
        (10..=300).map(|k| k as f64 * 0.005).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub mse: f64,
    pub abs_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub argmin_mse: f64,
    pub argmin_abs_bias: f64,
    pub c_mse: f64,
    pub c_bias: f64,
    pub replicates: usize,
    pub excluded: usize,
}

impl SweepReport {
    pub fn mse_distance(&self) -> f64 {
        (self.argmin_mse - self.c_mse).abs()
    }

    pub fn bias_distance(&self) -> f64 {
        (self.argmin_abs_bias - self.c_bias).abs()
    }
}

/// MSE and `|bias|` of `c * r_hat_raw` over a grid of constants, all
/// evaluated on the same simulated samples.
pub fn run_sweep(config: &SweepConfig, row: &ConstantsRow) -> Result<SweepReport> {
    if config.grid.is_empty() {
        return Err(Error::InvalidParams("empty constant grid".into()));
    }
    let regime = config
        .regime
        .regime(config.r, config.horizon, config.death_rate)?;
    let raw = replicate(config.seed, config.replicates, |rng| {
        let times = sample_coalescence_times(config.n, &regime, rng)?;
        match estimate_pairwise(&times, 1.0) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateTimes) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let raw: Vec<f64> = raw
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let excluded = config.replicates - raw.len();
    let r = config.r;
    let raw_mean = mean(&raw);
    let rows: Vec<SweepRow> = config
        .grid
        .iter()
        .map(|&c| SweepRow {
            c,
            mse: raw.iter().map(|x| (c * x - r).powi(2)).sum::<f64>() / raw.len() as f64,
            abs_bias: (c * raw_mean - r).abs(),
        })
        .collect();
    let argmin = |key: fn(&SweepRow) -> f64| {
        rows.iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)))
            .map(|row| row.c)
            .expect("non-empty grid")
    };
    Ok(SweepReport {
        argmin_mse: argmin(|row| row.mse),
        argmin_abs_bias: argmin(|row| row.abs_bias),
        rows,
        c_mse: row.c_mse,
        c_bias: row.c_bias,
        replicates: raw.len(),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsConfig {
    pub n: usize,
    pub r: f64,
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub n: usize,
    pub replicates: usize,
    /// `Var(sqrt(n) (r_hat_inv - r)) / r^2`
    pub scaled_var_inv: f64,
    /// `Var(sqrt(n) (r_hat_lengths - r)) / r^2`
    pub scaled_var_lengths: f64,
    pub target_inv: f64,
    pub target_lengths: f64,
    pub mean_inv: f64,
    pub mean_lengths: f64,
    /// Kolmogorov-Smirnov p-value of `r_hat_inv` against a fitted normal.
    pub ks_pvalue_inv: f64,
}

pub const MIN_ASYMPTOTIC_N: usize = 200;

/// Large-`n` variance of `r_hat_inv` and `r_hat_lengths` under the
/// large-`n` regime, against `4 - pi^2/3` and `1`.
pub fn run_asymptotics(config: &AsymptoticsConfig) -> Result<AsymptoticsReport> {
    if config.n < MIN_ASYMPTOTIC_N {
        return Err(Error::SampleTooSmall {
            n: config.n,
            min: MIN_ASYMPTOTIC_N,
        });
    }
    if config.replicates < 2 {
        return Err(Error::InsufficientReplicates {
            got: config.replicates,
            need: 2,
        });
    }
    let regime = Regime::LargeN {
        r: config.r,
        horizon: config.horizon,
    };
    let c = c_inv_closed_form(config.n)?;
    let pairs = replicate(config.seed, config.replicates, |rng| {
        let times = sample_coalescence_times(config.n, &regime, rng)?;
        Ok((estimate_pairwise(&times, c)?, estimate_lengths(&times)?))
    });
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let inv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let lengths: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let scale = config.n as f64 / (config.r * config.r);

    let (mu, sd) = (mean(&inv), variance(&inv).sqrt());
    let normal = Normal::new(mu, sd).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let d = ks_statistic(&inv, |x| normal.cdf(x));

    Ok(AsymptoticsReport {
        n: config.n,
        replicates: config.replicates,
        scaled_var_inv: variance(&inv) * scale,
        scaled_var_lengths: variance(&lengths) * scale,
        target_inv: 4.0 - PI * PI / 3.0,
        target_lengths: 1.0,
        mean_inv: mu,
        mean_lengths: mean(&lengths),
        ks_pvalue_inv: kolmogorov_pvalue(d, inv.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub ns: Vec<usize>,
    pub r: f64,
    pub horizon: f64,
    pub regime: RegimeKind,
    pub death_rate: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Coverage of the 95% interval, one row per `n`.
pub fn run_coverage(
    config: &CoverageConfig,
    constants: &ConstantsTable,
) -> Result<Vec<CoverageRow>> {
    let regime = config
        .regime
        .regime(config.r, config.horizon, config.death_rate)?;
    config
        .ns
        .iter()
        .map(|&n| {
            let row = constants.get(n).ok_or(Error::MissingConstants { n })?;
            let spec = ConfidenceSpec::from_row(row)?;
            let seed = cell_seed(config.seed, n, config.r);
            let cov = coverage_study(&spec, &regime, config.replicates, seed)?;
            Ok(CoverageRow {
                n,
                r: config.r,
                horizon: config.horizon,
                level: spec.level,
                coverage: cov.fraction(),
                replicates: cov.replicates - cov.excluded,
                excluded: cov.excluded,
            })
        })
        .collect()
}

pub fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(dir, name, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize) -> ConstantsRow {
        build_constants_row(n, 20_000, 3).unwrap()
    }

    #[test]
    fn metrics_identity() {
        let xs = [0.7, 1.4, 0.9, 2.2, 1.1];
        let m = MetricsRow::from_estimates(Method::Inv, 6, 1.0, 40.0, &xs, 0);
        assert!((m.mse - (m.variance + m.bias * m.bias)).abs() <= 1e-9 * m.mse);
        assert!(m.mse >= m.bias * m.bias && m.mae >= 0.0);
    }

    #[test]
    fn density_integrates_to_central_mass() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64 / 10_000.0).powi(2)).collect();
        let bins = density_bins(Method::Mse, 5, 1.0, &xs);
        assert_eq!(bins.len(), DENSITY_BINS);
        let mass: f64 = bins.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((mass - 0.99).abs() < 0.002, "mass = {mass}");
    }

    #[test]
    fn evaluate_orders_pairwise_methods() {
        let r5 = row(5);
        let t = CoalescenceTimes::new(vec![30.0, 31.5, 29.2, 30.7], Some(40.0)).unwrap();
        let mse = evaluate(Method::Mse, &t, Some(&r5)).unwrap();
        let bias = evaluate(Method::Bias, &t, Some(&r5)).unwrap();
        let inv = evaluate(Method::Inv, &t, Some(&r5)).unwrap();
        assert!(mse < bias && bias < inv);
        assert!(matches!(
            evaluate(Method::Mse, &t, None),
            Err(Error::MissingConstants { n: 5 })
        ));
        let est = estimate(Method::Inv, &t, Some(&r5)).unwrap();
        let (lo, hi) = est.ci.unwrap();
        assert!(lo < hi);
        assert!(estimate(Method::Lengths, &t, Some(&r5))
            .unwrap()
            .ci
            .is_none());
    }

    #[test]
    fn study_is_deterministic_and_consistent() {
        let mut table = ConstantsTable::default();
        ensure_constants(&mut table, &[6], 20_000, 2).unwrap();
        let config = StudyConfig {
            ns: vec![6],
            rs: vec![1.0],
            replicates: 2000,
            ..StudyConfig::default()
        };
        let a = run_study(&config, &table).unwrap();
        let b = run_study(&config, &table).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.metrics.len(), 5);
        for m in &a.metrics {
            assert!((m.mse - (m.variance + m.bias * m.bias)).abs() <= 1e-9 * m.mse);
        }
        assert_eq!(a.findings.len(), 1);
        assert_eq!(a.coverage.len(), 1);
    }

    #[test]
    fn study_needs_constants() {
        let config = StudyConfig {
            ns: vec![6],
            replicates: 10,
            ..StudyConfig::default()
        };
        assert!(matches!(
            run_study(&config, &ConstantsTable::default()),
            Err(Error::MissingConstants { n: 6 })
        ));
    }

    #[test]
    fn asymptotics_needs_large_n() {
        let config = AsymptoticsConfig {
            n: 50,
            r: 1.0,
            horizon: 40.0,
            replicates: 100,
            seed: 1,
        };
        assert!(run_asymptotics(&config).is_err());
    }
}
