//! Command-line front end for the `isobin` library.
//!
//! Three subcommands:
//!
//! - `test`: run the order-restricted test on observed counts read from a
//!   CSV (`total,successes` header) or JSON file, printing a JSON or text
//!   report.
//! - `weights`: compute the chi-bar-squared mixing weights for a design
//!   given either a data file or explicit sampling fractions.
//! - `simulate`: estimate size and power over built-in or custom scenarios,
//!   writing one result file per scenario and printing calibration verdicts
//!   and efficiencies.
//!
//! Every run with an explicit seed is bit-reproducible; exit status is
//! nonzero exactly when a contract is violated (unparseable input, invalid
//! design, unknown scenario, ...).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use isobin::chibar::{cone_covariance, resolve_weights, WeightsInfo, WeightsSpec};
use isobin::model::{IsotonicSample, NuVector};
use isobin::report::{run_test, TestOptions};
use isobin::sim::{
    dale_band, dale_check, efficiency, find_scenario, run_scenario, scenario_catalog,
    sweep_lambdas, Scenario, SimResult,
};
use isobin::stats::{StatKind, CANONICAL_LAMBDAS};

#[derive(Parser)]
#[command(
    name = "isobin",
    version,
    about = "Tests of equality against a nondecreasing trend in binomial proportions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test equality of proportions against the nondecreasing alternative.
    Test(TestArgs),
    /// Print the chi-bar-squared mixing weights for a design.
    Weights(WeightsArgs),
    /// Estimate size and power by simulation.
    Simulate(SimulateArgs),
}

/// Output encoding for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// How to obtain the chi-bar-squared weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    /// Closed form when available, Monte Carlo otherwise.
    Auto,
    /// Closed form only (designs with at most four categories).
    Closed,
    /// Monte Carlo with `--mc-reps` draws.
    Mc,
}

impl WeightsArg {
    fn to_spec(self, mc_reps: u64) -> WeightsSpec {
        match self {
            WeightsArg::Auto => WeightsSpec::Auto,
            WeightsArg::Closed => WeightsSpec::ClosedForm,
            WeightsArg::Mc => WeightsSpec::MonteCarlo { reps: mc_reps },
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// Data file: `.json`, or CSV with header `total,successes`.
    data: PathBuf,
    /// Power-divergence indices; accepts decimals and fractions like `2/3`.
    #[arg(long, num_args = 1.., value_parser = parse_lambda)]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Auto)]
    weights: WeightsArg,
    /// Draws for Monte Carlo weights.
    #[arg(long, default_value_t = 1_000_000)]
    mc_reps: u64,
    /// Seed for Monte Carlo weights.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the Haldane-corrected unrestricted log-odds inside D.
    #[arg(long)]
    haldane: bool,
    /// Reverse category order first (tests a nonincreasing trend).
    #[arg(long)]
    decreasing: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    /// Data file; sampling fractions are taken from its totals.
    #[arg(required_unless_present = "nu", conflicts_with = "nu")]
    data: Option<PathBuf>,
    /// Explicit sampling fractions (positive, summing to 1).
    #[arg(long, num_args = 2..)]
    nu: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Auto)]
    weights: WeightsArg,
    #[arg(long, default_value_t = 1_000_000)]
    mc_reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario ids (`A-0` ... `F-3`).
    #[arg(long, num_args = 1.., conflicts_with_all = ["all", "totals", "pis"])]
    scenario: Vec<String>,
    /// Run every built-in scenario.
    #[arg(long, conflicts_with_all = ["totals", "pis"])]
    all: bool,
    /// Category totals of a custom scenario.
    #[arg(long, num_args = 2.., requires = "pis")]
    totals: Option<Vec<u64>>,
    /// True success probabilities of a custom scenario.
    #[arg(long, num_args = 2.., requires = "totals")]
    pis: Option<Vec<f64>>,
    /// Replications per scenario.
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Nominal level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Power-divergence indices; defaults to the sweep grid.
    #[arg(long, num_args = 1.., value_parser = parse_lambda)]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = WeightsArg::Auto)]
    weights: WeightsArg,
    #[arg(long, default_value_t = 1_000_000)]
    mc_reps: u64,
    /// Master seed; per-scenario seeds are derived from it and the id.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result file format.
    #[arg(long, value_enum, default_value_t = SimFormat::Csv)]
    format: SimFormat,
    /// Directory for the per-scenario result files.
    #[arg(long, default_value = "sim-results")]
    out_dir: PathBuf,
}

/// On-disk encoding of simulation results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimFormat {
    Csv,
    Json,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Test(args) => cmd_test(args),
        Command::Weights(args) => cmd_weights(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

/// Parses a power-divergence index. Fractions (`2/3`) are evaluated
/// exactly; the common decimal `0.6667` is treated as two-thirds.
fn parse_lambda(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if s == "0.6667" {
        return Ok(2.0 / 3.0);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num
            .trim()
            .parse()
            .map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
        let d: f64 = den
            .trim()
            .parse()
            .map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
        if d == 0.0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(n / d);
    }
    s.parse::<f64>()
        .map_err(|e| format!("bad index {s:?}: {e}"))
}

/// One category row of an input file.
#[derive(Debug, Deserialize)]
struct CategoryRow {
    total: u64,
    successes: u64,
}

/// Top-level shape of a JSON data file.
#[derive(Debug, Deserialize)]
struct JsonData {
    categories: Vec<CategoryRow>,
}

/// Reads a data file, dispatching on its extension (`.json` or CSV).
fn read_sample(path: &Path, decreasing: bool) -> Result<IsotonicSample> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    let rows: Vec<CategoryRow> = if ext == "json" {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let data: JsonData = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a valid data file", path.display()))?;
        data.categories
    } else {
        let mut reader = csv::Reader::from_path(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{} is not a valid data file", path.display()))?
    };
    let mut pairs: Vec<(u64, u64)> = rows.iter().map(|r| (r.total, r.successes)).collect();
    if decreasing {
        pairs.reverse();
    }
    Ok(IsotonicSample::new(&pairs)?)
}

/// Prints to stdout or writes to a file, always ending with a newline.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let sample = read_sample(&args.data, args.decreasing)?;
    let opts = TestOptions {
        lambdas: args.lambdas.unwrap_or_else(|| CANONICAL_LAMBDAS.to_vec()),
        weights: args.weights.to_spec(args.mc_reps),
        seed: args.seed,
        haldane: args.haldane,
    };
    let report = run_test(&sample, &opts)?;
    let rendered = match args.format {
        Format::Json => report.to_json(),
        Format::Text => report.render_text(),
    };
    emit(&rendered, args.out.as_deref())
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let nu = match (&args.data, &args.nu) {
        (Some(path), None) => {
            let sample = read_sample(path, false)?;
            NuVector::from_totals(sample.totals())
        }
        (None, Some(values)) => NuVector::new(values.clone())?,
        _ => bail!("provide either a data file or --nu, not both"),
    };
    let metric = cone_covariance(&nu)?;
    let dist = resolve_weights(&metric, args.weights.to_spec(args.mc_reps), args.seed)?;
    let info = WeightsInfo::from_distribution(&dist);
    let corr = metric.correlation_matrix();
    let correlations: Vec<Vec<f64>> = (0..metric.dim())
        .map(|i| (0..metric.dim()).map(|j| corr[(i, j)]).collect())
        .collect();

    match args.format {
        Format::Json => {
            let value = serde_json::json!({
                "weights": info,
                "correlations": correlations,
            });
            emit(&serde_json::to_string_pretty(&value)?, None)
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "Chi-bar-squared weights ({})", info.method);
            for (i, w) in info.values.iter().enumerate() {
                let _ = writeln!(out, "  w{i} = {w:.6}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "Correlations of the cone covariance");
            for row in &correlations {
                let cells: Vec<String> = row.iter().map(|c| format!("{c:>9.6}")).collect();
                let _ = writeln!(out, "  {}", cells.join(" "));
            }
            emit(&out, None)
        }
    }
}

/// Derives the per-scenario seed from the master seed and the scenario id,
/// so results do not depend on which other scenarios share the invocation.
fn scenario_seed(master: u64, id: &str) -> u64 {
    splitmix64(master ^ fnv1a64(id.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Efficiency of one statistic against one baseline, if both sides have
/// defined rejection estimates and the baseline has positive gain.
fn eff_against(
    alt_row: &isobin::sim::StatResult,
    null_row: &isobin::sim::StatResult,
    base: Option<(f64, f64)>,
) -> Option<f64> {
    let (beta_base, alpha_base) = base?;
    let beta = alt_row.estimate?;
    let alpha = null_row.estimate?;
    efficiency(beta, alpha, beta_base, alpha_base).ok()
}

/// Size-corrected (`beta`, `alpha`) of a baseline statistic across the
/// alternative run and its matching null run.
fn baseline_pair(alt: &SimResult, null: &SimResult, kind: StatKind) -> Option<(f64, f64)> {
    let beta = alt.stat(kind)?.estimate?;
    let alpha = null.stat(kind)?.estimate?;
    Some((beta, alpha))
}

/// Per-statistic efficiencies of an alternative run against its null run:
/// `rho` uses the likelihood-ratio statistic `T(0)` as baseline, `rho_star`
/// the chi-squared statistic `S(1)`.
struct EfficiencyTable {
    baseline_id: String,
    rows: Vec<(Option<f64>, Option<f64>)>,
}

fn efficiency_table(alt: &SimResult, null: &SimResult) -> EfficiencyTable {
    let base_t0 = baseline_pair(alt, null, StatKind::T(0.0));
    let base_s1 = baseline_pair(alt, null, StatKind::S(1.0));
    let rows = alt
        .statistics
        .iter()
        .zip(&null.statistics)
        .map(|(a, n)| {
            debug_assert_eq!(a.statistic, n.statistic);
            debug_assert_eq!(a.lambda, n.lambda);
            (eff_against(a, n, base_t0), eff_against(a, n, base_s1))
        })
        .collect();
    EfficiencyTable {
        baseline_id: null.scenario.clone(),
        rows,
    }
}

/// The id of the matching null scenario (`F-2` -> `F-0`), when the result
/// is a known catalog entry distinct from the scenario itself.
fn matching_null_id(id: &str) -> Option<String> {
    let (prefix, suffix) = id.split_once('-')?;
    if suffix == "0" {
        return None;
    }
    let null_id = format!("{prefix}-0");
    find_scenario(&null_id).ok().map(|s| s.id().to_string())
}

/// Result CSV: the library's tidy layout plus two efficiency columns,
/// empty for null scenarios and for rows where no estimate exists.
fn sim_csv(result: &SimResult, eff: Option<&EfficiencyTable>) -> String {
    let mut out =
        String::from("scenario,statistic,lambda,estimate,kind,reps,undefined,rho,rho_star\n");
    for (i, s) in result.statistics.iter().enumerate() {
        let lambda = s.lambda.map(|l| l.to_string()).unwrap_or_default();
        let estimate = s
            .estimate
            .map(|e| e.to_string())
            .unwrap_or_else(|| "n/a".to_string());
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (rho, rho_star) = match eff {
            Some(table) => (fmt(table.rows[i].0), fmt(table.rows[i].1)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            result.scenario,
            s.statistic,
            lambda,
            estimate,
            result.kind,
            result.reps,
            s.undefined,
            rho,
            rho_star
        );
    }
    out
}

/// Stdout summary for one scenario: Dale calibration verdicts for null
/// scenarios, efficiencies for alternatives.
fn sim_summary(
    result: &SimResult,
    eff: Option<&EfficiencyTable>,
    alpha: f64,
    path: &Path,
) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}  {}  reps={}  -> {}",
        result.scenario,
        result.kind,
        result.reps,
        path.display()
    );
    if result.is_null() {
        for epsilon in [0.35, 0.7] {
            let (lo, hi) = dale_band(alpha, epsilon)?;
            let mut within = 0usize;
            let mut total = 0usize;
            let mut violators: Vec<String> = Vec::new();
            for s in &result.statistics {
                let Some(alpha_hat) = s.estimate else {
                    continue;
                };
                total += 1;
                // A size estimate of exactly zero sits outside any Dale
                // band but is not a logit-scale quantity; count it as a
                // violation directly.
                let ok =
                    alpha_hat > 0.0 && alpha_hat < 1.0 && dale_check(alpha_hat, alpha, epsilon)?;
                if ok {
                    within += 1;
                } else {
                    violators.push(match s.lambda {
                        Some(l) => format!("{}({l})", s.statistic),
                        None => s.statistic.clone(),
                    });
                }
            }
            let _ = write!(
                out,
                "  Dale eps={epsilon:.2}: {within}/{total} within [{lo:.4}, {hi:.4}]"
            );
            if violators.is_empty() {
                let _ = writeln!(out);
            } else {
                let _ = writeln!(out, "  (outside: {})", violators.join(", "));
            }
        }
    } else if let Some(table) = eff {
        let _ = writeln!(
            out,
            "  efficiency vs T(0) [rho] and S(1) [rho*], size-corrected with {}:",
            table.baseline_id
        );
        let _ = writeln!(
            out,
            "    {:<9}  {:>8}  {:>8}  {:>8}  {:>8}",
            "statistic", "lambda", "power", "rho", "rho*"
        );
        for (s, (rho, rho_star)) in result.statistics.iter().zip(&table.rows) {
            let lambda = match s.lambda {
                Some(l) => format!("{l:>8.4}"),
                None => format!("{:>8}", "-"),
            };
            let cell = |v: Option<f64>| match v {
                // Flush subtraction dust to zero so the table never shows
                // a spurious "-0.0000".
                Some(x) => format!("{:>8.4}", if x.abs() < 1e-12 { 0.0 } else { x }),
                None => format!("{:>8}", "n/a"),
            };
            let _ = writeln!(
                out,
                "    {:<9}  {}  {}  {}  {}",
                s.statistic,
                lambda,
                cell(s.estimate),
                cell(*rho),
                cell(*rho_star)
            );
        }
    } else {
        let _ = writeln!(out, "  (no matching null scenario; efficiencies skipped)");
    }
    Ok(out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let lambdas = args.lambdas.clone().unwrap_or_else(sweep_lambdas);
    let scenarios: Vec<Scenario> = if args.all {
        scenario_catalog()
    } else if !args.scenario.is_empty() {
        args.scenario
            .iter()
            .map(|id| find_scenario(id))
            .collect::<isobin::Result<_>>()?
    } else if let (Some(totals), Some(pis)) = (args.totals.clone(), args.pis.clone()) {
        vec![Scenario::custom("custom", totals, pis)?]
    } else {
        bail!("choose scenarios via --scenario, --all, or --totals/--pis");
    };

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let spec = args.weights.to_spec(args.mc_reps);

    // Results are cached by id so alternatives can share their implicitly
    // simulated null baseline with an explicitly requested one.
    let mut cache: BTreeMap<String, SimResult> = BTreeMap::new();
    let run_cached = |sc: &Scenario, cache: &mut BTreeMap<String, SimResult>| -> Result<()> {
        if !cache.contains_key(sc.id()) {
            let seed = scenario_seed(args.seed, sc.id());
            let result = run_scenario(sc, args.reps, args.alpha, &lambdas, seed, spec)?;
            cache.insert(sc.id().to_string(), result);
        }
        Ok(())
    };

    for sc in &scenarios {
        run_cached(sc, &mut cache)?;
        let eff = match matching_null_id(sc.id()) {
            Some(null_id) => {
                let null_sc = find_scenario(&null_id)?;
                run_cached(&null_sc, &mut cache)?;
                Some(efficiency_table(&cache[sc.id()], &cache[&null_id]))
            }
            None => None,
        };
        let result = &cache[sc.id()];

        let (file_name, contents) = match args.format {
            SimFormat::Csv => (format!("{}.csv", sc.id()), sim_csv(result, eff.as_ref())),
            SimFormat::Json => (format!("{}.json", sc.id()), result.to_json() + "\n"),
        };
        let path = args.out_dir.join(file_name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;

        print!("{}", sim_summary(result, eff.as_ref(), args.alpha, &path)?);
    }
    Ok(())
}
