//! End-to-end tests of the `isobin` binary: input ingestion, report
//! formats, weight computation, simulation files, determinism, and error
//! exits.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx::assert_abs_diff_eq;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isobin"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        !out.status.success(),
        "command {args:?} unexpectedly passed"
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Row lookup in a JSON test report: `(label, lambda)` to 4 decimals.
fn stat_row<'v>(report: &'v Value, label: &str, lambda: Option<f64>) -> &'v Value {
    report["statistics"]
        .as_array()
        .unwrap()
        .iter()
        .find(|row| {
            row["statistic"] == label
                && match (row["lambda"].as_f64(), lambda) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                    (None, None) => true,
                    _ => false,
                }
        })
        .unwrap_or_else(|| panic!("no row {label} {lambda:?}"))
}

const DATA_CSV: &str = "malformation.csv";
const DATA_JSON: &str = "malformation.json";

#[test]
fn test_report_reproduces_reference_table() {
    let stdout = run_ok(&["test", data(DATA_CSV).to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout).unwrap();

    let whd = [
        ("W", 2.5979, 0.1686),
        ("H", 2.6363, 0.1653),
        ("D", 2.6462, 0.1645),
    ];
    for (label, value, p) in whd {
        let row = stat_row(&report, label, None);
        assert_abs_diff_eq!(row["value"].as_f64().unwrap(), value, epsilon = 1e-3);
        assert_abs_diff_eq!(row["p_value"].as_f64().unwrap(), p, epsilon = 1e-3);
    }
    let grid = [-1.5, -1.0, -0.5, 0.0, 2.0 / 3.0, 1.0];
    let t_ref = [
        (3.3068, 0.1177),
        (3.8173, 0.0911),
        (4.4920, 0.0650),
        (5.4057, 0.0413),
        (7.2076, 0.0169),
        (8.4895, 0.0090),
    ];
    let s_ref = [
        (3.2993, 0.1181),
        (3.8124, 0.0913),
        (4.4896, 0.0651),
        (5.4057, 0.0413),
        (7.2107, 0.0169),
        (8.4942, 0.0090),
    ];
    for (&lambda, &(value, p)) in grid.iter().zip(&t_ref) {
        let row = stat_row(&report, "T", Some(lambda));
        assert_abs_diff_eq!(row["value"].as_f64().unwrap(), value, epsilon = 1e-3);
        assert_abs_diff_eq!(row["p_value"].as_f64().unwrap(), p, epsilon = 1e-3);
    }
    for (&lambda, &(value, p)) in grid.iter().zip(&s_ref) {
        let row = stat_row(&report, "S", Some(lambda));
        assert_abs_diff_eq!(row["value"].as_f64().unwrap(), value, epsilon = 1e-3);
        assert_abs_diff_eq!(row["p_value"].as_f64().unwrap(), p, epsilon = 1e-3);
    }
    assert_eq!(report["weights"]["method"], "closed_form");
}

#[test]
fn csv_and_json_inputs_agree_byte_for_byte() {
    let from_csv = run_ok(&["test", data(DATA_CSV).to_str().unwrap()]);
    let from_json = run_ok(&["test", data(DATA_JSON).to_str().unwrap()]);
    assert_eq!(from_csv, from_json);
}

#[test]
fn json_report_round_trips_through_the_library_type() {
    let stdout = run_ok(&["test", data(DATA_CSV).to_str().unwrap()]);
    let report: isobin::report::TestReport = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report.to_json() + "\n", stdout);
}

#[test]
fn text_format_renders_aligned_table() {
    let stdout = run_ok(&["test", data(DATA_CSV).to_str().unwrap(), "--format", "text"]);
    assert!(stdout.contains("statistic"));
    assert!(stdout.contains("closed_form"));
    assert!(stdout.contains("2.5978"));
    assert!(stdout.contains("0.6667"));
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let path = tmp("report.json");
    let stdout = run_ok(&[
        "test",
        data(DATA_CSV).to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty());
    let on_disk = fs::read_to_string(&path).unwrap();
    let direct = run_ok(&["test", data(DATA_CSV).to_str().unwrap()]);
    assert_eq!(on_disk, direct);
}

#[test]
fn decreasing_flag_reverses_before_analysis() {
    // Feeding the rows in reversed order with --decreasing must reproduce
    // the increasing-order analysis exactly.
    let reversed = tmp("malformation-reversed.csv");
    fs::write(
        &reversed,
        "total,successes\n165,2\n793,5\n14502,38\n17114,48\n",
    )
    .unwrap();
    let flipped = run_ok(&["test", reversed.to_str().unwrap(), "--decreasing"]);
    let straight = run_ok(&["test", data(DATA_CSV).to_str().unwrap()]);
    assert_eq!(flipped, straight);
}

#[test]
fn lambda_flag_accepts_fractions_and_the_rounded_literal() {
    let a = run_ok(&["test", data(DATA_CSV).to_str().unwrap(), "--lambdas", "2/3"]);
    let b = run_ok(&[
        "test",
        data(DATA_CSV).to_str().unwrap(),
        "--lambdas",
        "0.6667",
    ]);
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    let row = stat_row(&report, "T", Some(2.0 / 3.0));
    assert_abs_diff_eq!(row["value"].as_f64().unwrap(), 7.2076, epsilon = 1e-3);
}

#[test]
fn monte_carlo_weights_agree_with_closed_form() {
    let closed = run_ok(&[
        "test",
        data(DATA_CSV).to_str().unwrap(),
        "--weights",
        "closed",
    ]);
    let mc = run_ok(&[
        "test",
        data(DATA_CSV).to_str().unwrap(),
        "--weights",
        "mc",
        "--mc-reps",
        "1000000",
        "--seed",
        "7",
    ]);
    let closed: Value = serde_json::from_str(&closed).unwrap();
    let mc: Value = serde_json::from_str(&mc).unwrap();
    assert_eq!(mc["weights"]["method"], "monte_carlo");
    let rows = closed["statistics"].as_array().unwrap();
    let mc_rows = mc["statistics"].as_array().unwrap();
    assert_eq!(rows.len(), mc_rows.len());
    for (a, b) in rows.iter().zip(mc_rows) {
        assert_eq!(a["value"], b["value"]);
        assert_abs_diff_eq!(
            a["p_value"].as_f64().unwrap(),
            b["p_value"].as_f64().unwrap(),
            epsilon = 1e-3
        );
    }
}

#[test]
fn explicit_seeds_are_bit_reproducible() {
    let args = [
        "test",
        "--weights",
        "mc",
        "--mc-reps",
        "200000",
        "--seed",
        "11",
    ];
    let first = run_ok(&[&args[..], &[data(DATA_CSV).to_str().unwrap()]].concat());
    let second = run_ok(&[&args[..], &[data(DATA_CSV).to_str().unwrap()]].concat());
    assert_eq!(first, second);
}

#[test]
fn weights_command_from_data_file() {
    let stdout = run_ok(&["weights", data(DATA_CSV).to_str().unwrap()]);
    assert!(stdout.contains("closed_form"));
    assert!(stdout.contains("w0 = 0.179246"));
    assert!(stdout.contains("w1 = 0.421499"));
    assert!(stdout.contains("w2 = 0.320754"));
    assert!(stdout.contains("w3 = 0.078501"));
    assert!(stdout.contains("-0.167527"));
    assert!(stdout.contains("-0.404109"));
}

#[test]
fn weights_command_two_categories_is_half_half() {
    let stdout = run_ok(&["weights", "--nu", "0.5", "0.5", "--format", "json"]);
    let value: Value = serde_json::from_str(&stdout).unwrap();
    let weights = value["weights"]["values"].as_array().unwrap();
    assert_eq!(weights.len(), 2);
    assert_eq!(weights[0].as_f64().unwrap(), 0.5);
    assert_eq!(weights[1].as_f64().unwrap(), 0.5);
}

#[test]
fn weights_command_large_design_is_stable_across_seeds() {
    let run_with = |seed: &str| {
        let stdout = run_ok(&[
            "weights",
            "--nu",
            "0.2",
            "0.2",
            "0.2",
            "0.2",
            "0.2",
            "--weights",
            "mc",
            "--mc-reps",
            "1000000",
            "--seed",
            seed,
            "--format",
            "json",
        ]);
        let value: Value = serde_json::from_str(&stdout).unwrap();
        value["weights"]["values"]
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w.as_f64().unwrap())
            .collect::<Vec<_>>()
    };
    let a = run_with("1");
    let b = run_with("2");
    assert_eq!(a.len(), 5);
    for (x, y) in a.iter().zip(&b) {
        assert_abs_diff_eq!(x, y, epsilon = 3e-3);
    }
    let sum: f64 = a.iter().sum();
    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
}

#[test]
fn weights_command_closed_form_unavailable_above_four() {
    let stderr = run_err(&[
        "weights",
        "--nu",
        "0.2",
        "0.2",
        "0.2",
        "0.2",
        "0.2",
        "--weights",
        "closed",
    ]);
    assert!(stderr.to_lowercase().contains("closed"), "{stderr}");
}

#[test]
fn weights_command_rejects_bad_fractions() {
    let stderr = run_err(&["weights", "--nu", "0.5", "0.6"]);
    assert!(stderr.contains("sum"), "{stderr}");
}

#[test]
fn simulate_null_scenario_writes_csv_and_dale_verdicts() {
    let dir = tmp("sim-null");
    let stdout = run_ok(&[
        "simulate",
        "--scenario",
        "A-0",
        "--reps",
        "400",
        "--seed",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("A-0  size"));
    assert!(stdout.contains("Dale eps=0.35"));
    assert!(stdout.contains("Dale eps=0.70"));

    let csv = fs::read_to_string(dir.join("A-0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,statistic,lambda,estimate,kind,reps,undefined,rho,rho_star"
    );
    // W, H, D plus T and S over the 20-value sweep grid.
    assert_eq!(lines.count(), 3 + 2 * 20);
    for line in csv.lines().skip(1) {
        assert!(line.starts_with("A-0,"));
        assert!(line.contains(",size,400,"));
        assert!(
            line.ends_with(",,"),
            "null rows carry no efficiencies: {line}"
        );
    }
}

#[test]
fn simulate_alternative_reports_efficiencies_with_self_baseline_zero() {
    let dir = tmp("sim-alt");
    let stdout = run_ok(&[
        "simulate",
        "--scenario",
        "F-1",
        "--reps",
        "400",
        "--seed",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("F-1  power"));
    assert!(stdout.contains("efficiency vs T(0) [rho] and S(1) [rho*]"));
    assert!(stdout.contains("size-corrected with F-0"));

    let csv = fs::read_to_string(dir.join("F-1.csv")).unwrap();
    // The likelihood-ratio baseline has efficiency exactly zero against
    // itself, and the chi-squared baseline likewise in its own column.
    let t0 = csv
        .lines()
        .find(|l| l.starts_with("F-1,T,0,"))
        .expect("T(0) row");
    let fields: Vec<&str> = t0.split(',').collect();
    assert_eq!(fields[7], "0", "{t0}");
    let s1 = csv
        .lines()
        .find(|l| l.starts_with("F-1,S,1,"))
        .expect("S(1) row");
    let fields: Vec<&str> = s1.split(',').collect();
    assert_eq!(fields[8], "0", "{s1}");
    // Only the requested scenario gets a file; the baseline is internal.
    assert!(!dir.join("F-0.csv").exists());
}

#[test]
fn simulate_explicit_null_shares_the_derived_seed() {
    // Running F-0 alone and F-0 alongside F-1 must produce identical
    // baseline tallies, because per-scenario seeds depend only on the
    // master seed and the id.
    let solo = tmp("sim-solo");
    let pair = tmp("sim-pair");
    run_ok(&[
        "simulate",
        "--scenario",
        "F-0",
        "--reps",
        "300",
        "--seed",
        "4",
        "--out-dir",
        solo.to_str().unwrap(),
    ]);
    run_ok(&[
        "simulate",
        "--scenario",
        "F-0",
        "F-1",
        "--reps",
        "300",
        "--seed",
        "4",
        "--out-dir",
        pair.to_str().unwrap(),
    ]);
    let a = fs::read_to_string(solo.join("F-0.csv")).unwrap();
    let b = fs::read_to_string(pair.join("F-0.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_json_files_round_trip() {
    let dir = tmp("sim-json");
    run_ok(&[
        "simulate",
        "--scenario",
        "B-2",
        "--reps",
        "250",
        "--seed",
        "6",
        "--format",
        "json",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(dir.join("B-2.json")).unwrap();
    let parsed: isobin::sim::SimResult = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.to_json() + "\n", text);
    assert_eq!(parsed.scenario, "B-2");
    assert_eq!(parsed.kind, "power");
    assert_eq!(parsed.reps, 250);
}

#[test]
fn simulate_all_catalog_scenarios_smoke() {
    let dir = tmp("sim-all");
    let stdout = run_ok(&[
        "simulate",
        "--all",
        "--reps",
        "300",
        "--seed",
        "3",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    for letter in ["A", "B", "C", "D", "E", "F"] {
        for index in 0..4 {
            let id = format!("{letter}-{index}");
            assert!(stdout.contains(&id), "missing summary for {id}");
            let csv = fs::read_to_string(dir.join(format!("{id}.csv"))).unwrap();
            assert_eq!(csv.lines().count(), 1 + 3 + 2 * 20, "{id}");
            assert!(csv.starts_with("scenario,"));
        }
    }
}

#[test]
fn simulate_custom_scenario() {
    let dir = tmp("sim-custom");
    let stdout = run_ok(&[
        "simulate",
        "--totals",
        "50",
        "50",
        "--pis",
        "0.2",
        "0.3",
        "--reps",
        "200",
        "--seed",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("custom  power"));
    assert!(stdout.contains("efficiencies skipped"));
    assert!(dir.join("custom.csv").exists());

    let null_out = run_ok(&[
        "simulate",
        "--totals",
        "50",
        "50",
        "--pis",
        "0.2",
        "0.2",
        "--reps",
        "200",
        "--seed",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(null_out.contains("custom  size"));
    assert!(null_out.contains("Dale eps=0.35"));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let first = tmp("sim-det-1");
    let second = tmp("sim-det-2");
    let third = tmp("sim-det-3");
    for (dir, seed) in [(&first, "5"), (&second, "5"), (&third, "6")] {
        run_ok(&[
            "simulate",
            "--scenario",
            "D-1",
            "--reps",
            "300",
            "--seed",
            seed,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
    }
    let a = fs::read_to_string(first.join("D-1.csv")).unwrap();
    let b = fs::read_to_string(second.join("D-1.csv")).unwrap();
    let c = fs::read_to_string(third.join("D-1.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn simulate_unknown_scenario_fails() {
    let stderr = run_err(&["simulate", "--scenario", "Z-9", "--reps", "10"]);
    assert!(stderr.to_lowercase().contains("scenario"), "{stderr}");
}

#[test]
fn simulate_zero_replications_fails() {
    let stderr = run_err(&[
        "simulate",
        "--scenario",
        "A-0",
        "--reps",
        "0",
        "--out-dir",
        tmp("sim-zero").to_str().unwrap(),
    ]);
    assert!(stderr.contains("replication"), "{stderr}");
}

#[test]
fn test_command_error_exits() {
    // Missing file.
    let stderr = run_err(&["test", tmp("does-not-exist.csv").to_str().unwrap()]);
    assert!(stderr.contains("cannot read"), "{stderr}");

    // Too few categories.
    let one = tmp("one-category.csv");
    fs::write(&one, "total,successes\n50,5\n").unwrap();
    let stderr = run_err(&["test", one.to_str().unwrap()]);
    assert!(stderr.contains("categories"), "{stderr}");

    // Successes exceeding the total.
    let bad = tmp("excess.csv");
    fs::write(&bad, "total,successes\n50,5\n30,31\n").unwrap();
    let stderr = run_err(&["test", bad.to_str().unwrap()]);
    assert!(stderr.contains("exceed"), "{stderr}");

    // Malformed CSV (missing column).
    let broken = tmp("broken.csv");
    fs::write(&broken, "total\n50\n60\n").unwrap();
    let stderr = run_err(&["test", broken.to_str().unwrap()]);
    assert!(stderr.contains("not a valid data file"), "{stderr}");
}
