use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use growthrate::calibration::{build_constants_table, row_seed, sample_sn, DEFAULT_REPLICATES};
use growthrate::confidence::ConfidenceSpec;
use growthrate::estimators::{estimate_lengths_tree, estimate_pairwise};
use growthrate::harness::{
    ensure_constants, estimate, run_asymptotics, run_coverage, run_study, run_sweep, write_rows,
    AsymptoticsConfig, CoverageConfig, RegimeKind, StudyConfig, SweepConfig, STUDY_METHODS,
};
use growthrate::io::{read_times_csv, write_times_csv};
use growthrate::rng::replicate;
use growthrate::sim::build_cpp_tree;
use growthrate::tree::{parse_newick_many, DEFAULT_ULTRAMETRIC_TOL};
use growthrate::{
    sample_coalescence_times, CoalescenceTimes, ConstantsTable, Error, Method, SampleTree,
};

const TABLE_NS: [usize; 24] = [
    5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 30, 40, 50, 60, 70, 80, 90, 100,
];
const CONSTANTS_FILE: &str = "constants.csv";

#[derive(Parser)]
#[command(
    name = "growthrate",
    version,
    about = "Growth-rate estimation from sample coalescence times"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Constants table to read. Missing rows are calibrated on the fly.
    #[arg(long, global = true)]
    constants: Option<PathBuf>,
    /// Monte Carlo replicates for the command (each command has its own default).
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = RegimeArg::Exact)]
    regime: RegimeArg,
    /// Replicates used when a constants row has to be computed on the fly.
    #[arg(long, global = true, default_value_t = DEFAULT_REPLICATES)]
    calibration_replicates: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Exact,
    FixedN,
    LargeN,
}

impl From<RegimeArg> for RegimeKind {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Exact => RegimeKind::Exact,
            RegimeArg::FixedN => RegimeKind::FixedN,
            RegimeArg::LargeN => RegimeKind::LargeN,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate coalescence times (and optionally trees).
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "horizon", visible_alias = "T", default_value_t = 40.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        death_rate: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Also write the genealogies as Newick.
        #[arg(long)]
        newick: bool,
    },
    /// Estimate r from a times CSV or a Newick file.
    Estimate {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = STUDY_METHODS.map(|m| m.to_string()))]
        methods: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Relative tolerance for tip-depth differences in Newick input.
        #[arg(long, default_value_t = DEFAULT_ULTRAMETRIC_TOL)]
        tol: f64,
    },
    /// Compute the constants table.
    Calibrate {
        #[arg(long, value_delimiter = ',', default_values_t = TABLE_NS)]
        ns: Vec<usize>,
    },
    /// Compare the estimators over a grid of (n, r).
    Study {
        #[arg(long, value_delimiter = ',', default_values_t = [5, 6, 7, 8, 9, 10, 15, 20, 50])]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
        rs: Vec<f64>,
        #[arg(long = "horizon", visible_alias = "T", default_value_t = 40.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        death_rate: f64,
        #[arg(long, value_delimiter = ',', default_values_t = STUDY_METHODS.map(|m| m.to_string()))]
        methods: Vec<String>,
    },
    /// MSE and |bias| of c * r_hat over a grid of constants c.
    Sweep {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long = "horizon", visible_alias = "T", default_value_t = 40.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        death_rate: f64,
        #[arg(long, default_value_t = 0.05)]
        c_min: f64,
        #[arg(long, default_value_t = 1.5)]
        c_max: f64,
        #[arg(long, default_value_t = 0.005)]
        c_step: f64,
    },
    /// Large-n variance of the inverse-unbiased and branch-length estimators.
    Asymptotics {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "horizon", visible_alias = "T", default_value_t = 40.0)]
        horizon: f64,
    },
    /// Empirical coverage of the 95% interval.
    Coverage {
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long = "horizon", visible_alias = "T", default_value_t = 40.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        death_rate: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> ExitCode {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_numerical() => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let c = &cli.common;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    match cli.command {
        Command::Simulate {
            n,
            r,
            horizon,
            death_rate,
            count,
            newick,
        } => {
            simulate(c, n, r, horizon, death_rate, count, newick)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate {
            input,
            methods,
            level,
            format,
            tol,
        } => estimate_cmd(c, &input, &parse_methods(&methods)?, level, format, tol),
        Command::Calibrate { ns } => {
            let replicates = c.replicates.unwrap_or(DEFAULT_REPLICATES);
            let table = build_constants_table(&ns, replicates, c.seed)?;
            let path = c.out.join(CONSTANTS_FILE);
            table.write(&path)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Study {
            ns,
            rs,
            horizon,
            death_rate,
            methods,
        } => {
            let config = StudyConfig {
                ns,
                rs,
                horizon,
                regime: c.regime.into(),
                death_rate,
                replicates: c.replicates.unwrap_or(10_000),
                seed: c.seed,
                methods: parse_methods(&methods)?,
                out_dir: Some(c.out.clone()),
            };
            let table = load_constants(c, &config.ns)?;
            let report = run_study(&config, &table)?;
            for path in report.write(&c.out)? {
                println!("{}", path.display());
            }
            for f in &report.findings {
                log::info!(
                    "n = {}, r = {}: min MSE {}, min MAE {}, |bias(bias)|/r = {:?}",
                    f.n,
                    f.r,
                    f.min_mse,
                    f.min_mae,
                    f.bias_estimator_rel_bias
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            n,
            r,
            horizon,
            death_rate,
            c_min,
            c_max,
            c_step,
        } => {
            if !(c_step > 0.0 && c_max >= c_min) {
                bail!(Error::InvalidParams(
                    "need c_step > 0 and c_max >= c_min".into()
                ));
            }
            let steps = ((c_max - c_min) / c_step + 1e-9).floor() as usize;
            let config = SweepConfig {
                n,
                r,
                horizon,
                regime: c.regime.into(),
                death_rate,
                grid: (0..=steps).map(|k| c_min + k as f64 * c_step).collect(),
                replicates: c.replicates.unwrap_or(10_000),
                seed: c.seed,
            };
            let table = load_constants(c, &[n])?;
            let row = table.get(n).expect("ensured above");
            let report = run_sweep(&config, row)?;
            println!(
                "{}",
                write_rows(&c.out, "sweep.csv", &report.rows)?.display()
            );
            write_json(
                &c.out.join("sweep_summary.json"),
                &SweepSummary::from(&report),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Asymptotics { n, r, horizon } => {
            let report = run_asymptotics(&AsymptoticsConfig {
                n,
                r,
                horizon,
                replicates: c.replicates.unwrap_or(10_000),
                seed: c.seed,
            })?;
            write_json(&c.out.join("asymptotics.json"), &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Coverage {
            ns,
            r,
            horizon,
            death_rate,
        } => {
            let table = load_constants(c, &ns)?;
            let rows = run_coverage(
                &CoverageConfig {
                    ns,
                    r,
                    horizon,
                    regime: c.regime.into(),
                    death_rate,
                    replicates: c.replicates.unwrap_or(1000),
                    seed: c.seed,
                },
                &table,
            )?;
            println!("{}", write_rows(&c.out, "coverage.csv", &rows)?.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_methods(names: &[String]) -> anyhow::Result<Vec<Method>> {
    Ok(names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, Error>>()?)
}

/// Reads `--constants` if given and calibrates any row still missing. The
/// completed table is saved under the output directory when it changed.
fn load_constants(c: &Common, ns: &[usize]) -> anyhow::Result<ConstantsTable> {
    let mut table = match &c.constants {
        Some(path) => ConstantsTable::read(path)?,
        None => ConstantsTable::default(),
    };
    let before = table.clone();
    ensure_constants(&mut table, ns, c.calibration_replicates, c.seed)?;
    if table != before {
        table.write(&c.out.join(CONSTANTS_FILE))?;
    }
    Ok(table)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    argmin_mse: f64,
    argmin_abs_bias: f64,
    c_mse: f64,
    c_bias: f64,
    mse_distance: f64,
    bias_distance: f64,
    replicates: usize,
    excluded: usize,
}

impl From<&growthrate::harness::SweepReport> for SweepSummary {
    fn from(r: &growthrate::harness::SweepReport) -> Self {
        Self {
            argmin_mse: r.argmin_mse,
            argmin_abs_bias: r.argmin_abs_bias,
            c_mse: r.c_mse,
            c_bias: r.c_bias,
            mse_distance: r.mse_distance(),
            bias_distance: r.bias_distance(),
            replicates: r.replicates,
            excluded: r.excluded,
        }
    }
}

fn simulate(
    c: &Common,
    n: usize,
    r: f64,
    horizon: f64,
    death_rate: f64,
    count: usize,
    newick: bool,
) -> anyhow::Result<()> {
    let regime = RegimeKind::from(c.regime).regime(r, horizon, death_rate)?;
    let samples = replicate(c.seed, count, |rng| {
        sample_coalescence_times(n, &regime, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let path = c.out.join("times.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_times_csv(std::io::BufWriter::new(file), &samples)?;
    println!("{}", path.display());

    if newick {
        let mut text = String::new();
        for s in &samples {
            text.push_str(&build_cpp_tree(s)?.to_newick());
            text.push('\n');
        }
        let path = c.out.join("trees.nwk");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateRow {
    input: String,
    n: Option<usize>,
    method: Option<Method>,
    estimate: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    error: Option<String>,
}

impl EstimateRow {
    fn failed(input: &str, n: Option<usize>, method: Option<Method>, e: &Error) -> Self {
        Self {
            input: input.to_string(),
            n,
            method,
            estimate: None,
            ci_lo: None,
            ci_hi: None,
            error: Some(e.to_string()),
        }
    }
}

/// One parsed input: a sample of times, and the tree it came from if any.
struct Item {
    label: String,
    parsed: Result<(CoalescenceTimes, Option<SampleTree>), Error>,
}

fn read_items(path: &Path, tol: f64) -> anyhow::Result<Vec<Item>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.display().to_string();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        || text.trim_start().starts_with("n,");
    if is_csv {
        let rows = read_times_csv(text.as_bytes()).map_err(|e| relabel(e, path))?;
        return Ok(rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| Item {
                label: format!("{name}:{}", i + 2),
                parsed: row.map(|t| (t, None)).map_err(|e| relabel(e, path)),
            })
            .collect());
    }
    let trees = parse_newick_many(&text)?;
    Ok(trees
        .into_iter()
        .enumerate()
        .map(|(i, tree)| Item {
            label: format!("{name}#{}", i + 1),
            parsed: tree.coalescence_times(tol).map(|t| (t, Some(tree))),
        })
        .collect())
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { line, msg, .. } => Error::Format {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    }
}

fn estimate_cmd(
    c: &Common,
    input: &Path,
    methods: &[Method],
    level: f64,
    format: Format,
    tol: f64,
) -> anyhow::Result<ExitCode> {
    if !(level > 0.0 && level < 1.0) {
        bail!(Error::InvalidParams(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let items = read_items(input, tol)?;
    let ns: Vec<usize> = items
        .iter()
        .filter_map(|it| it.parsed.as_ref().ok().map(|(t, _)| t.n()))
        .filter(|&n| n >= 3)
        .collect();
    let needs_constants = methods.iter().any(|m| m.is_pairwise());
    let table = if needs_constants {
        load_constants(c, &ns)?
    } else {
        ConstantsTable::default()
    };

    let mut rows = Vec::new();
    let mut first_error: Option<Error> = None;
    let mut any_ok = false;
    for item in items {
        let (times, tree) = match item.parsed {
            Ok(p) => p,
            Err(e) => {
                rows.push(EstimateRow::failed(&item.label, None, None, &e));
                first_error.get_or_insert(e);
                continue;
            }
        };
        let n = times.n();
        let row = table.get(n);
        let spec = match row {
            Some(row) if (level - 0.95).abs() < 1e-12 => ConfidenceSpec::from_row(row).ok(),
            Some(_) => {
                log::warn!(
                    "level {level}: computing S_{n} quantiles with {} replicates",
                    c.calibration_replicates
                );
                sample_sn(n, c.calibration_replicates, row_seed(c.seed, n))
                    .and_then(|s| ConfidenceSpec::from_sample(&s, level))
                    .ok()
            }
            None => None,
        };
        for &m in methods {
            let result = match (m, &tree) {
                (Method::Lengths, Some(tree)) => estimate_lengths_tree(tree).map(|p| (p, None)),
                _ => estimate(m, &times, row).and_then(|est| {
                    let ci = match (m.is_pairwise(), spec) {
                        (true, Some(spec)) => Some(spec.interval(estimate_pairwise(&times, 1.0)?)),
                        _ => None,
                    };
                    Ok((est.point, ci))
                }),
            };
            match result {
                Ok((point, ci)) => {
                    any_ok = true;
                    rows.push(EstimateRow {
                        input: item.label.clone(),
                        n: Some(n),
                        method: Some(m),
                        estimate: Some(point),
                        ci_lo: ci.map(|c| c.0),
                        ci_hi: ci.map(|c| c.1),
                        error: None,
                    });
                }
                Err(e) => {
                    log::warn!("{} ({m}): {e}", item.label);
                    rows.push(EstimateRow::failed(&item.label, Some(n), Some(m), &e));
                    first_error.get_or_insert(e);
                }
            }
        }
    }

    let path = match format {
        Format::Csv => {
            let path = c.out.join("estimates.csv");
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
            println!("{}", path.display());
            path
        }
        Format::Json => {
            let path = c.out.join("estimates.json");
            write_json(&path, &rows)?;
            path
        }
    };
    log::debug!("wrote {}", path.display());

    // Failed inputs are reported in their rows; the exit status only flags
    // a batch in which nothing could be estimated.
    match (any_ok, first_error) {
        (false, Some(e)) => Ok(exit_code_for(&anyhow::Error::new(e))),
        _ => Ok(ExitCode::SUCCESS),
    }
}
