use std::collections::HashMap;
use std::process::{Command, Output};

use elastic_enhancement::formfactor::b2_transient;
use elastic_enhancement::{Chaoticity, QuadratureConfig, ScaledTime};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastic-enhancement"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV document with `#` comment lines, keyed by header.
fn csv_rows(text: &str) -> Vec<HashMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .zip(r.iter())
                .map(|(h, v)| (h.to_owned(), v.to_owned()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn formfactor_regular_is_identically_zero() {
    let o = run(&["formfactor", "--kappa", "0", "--points", "21", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "formfactor");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r["b2"].as_f64() == Some(0.0)));
}

#[test]
fn formfactor_gue_is_the_triangle() {
    let o = run(&["formfactor", "--kappa", "inf", "--points", "41"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# elastic-enhancement formfactor\n# schema_version=1\n"));
    for row in csv_rows(&text) {
        let s = num(&row, "s");
        let expected = if s < 1.0 { 1.0 - s } else { 0.0 };
        assert!((num(&row, "b2") - expected).abs() < 1e-14, "s={s}");
    }
}

#[test]
fn formfactor_matches_library_bit_for_bit() {
    let o = run(&[
        "formfactor",
        "--kappa",
        "5",
        "--points",
        "17",
        "--abs-tol",
        "1e-11",
        "--rel-tol",
        "1e-11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = QuadratureConfig {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        ..QuadratureConfig::default()
    };
    for row in csv_rows(&stdout(&o)) {
        let s = num(&row, "s");
        let lib = b2_transient(ScaledTime::new(s).unwrap(), Chaoticity::Finite(5.0), &cfg).unwrap();
        assert_eq!(num(&row, "b2").to_bits(), lib.value.to_bits(), "s={s}");
    }
}

#[test]
fn curve_defaults_cover_every_kappa_and_the_tangent() {
    let o = run(&["curve"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let count = |kappa: &str, method: &str| {
        rows.iter()
            .filter(|r| r["kappa"] == kappa && r["method"] == method)
            .count()
    };
    for k in ["0.5", "5.0", "50.0"] {
        assert_eq!(count(k, "exact"), 241, "kappa={k}");
        assert_eq!(count(k, "approx_large_kappa"), 241, "kappa={k}");
    }
    // The series is only emitted where κ/η ≤ 1/2.
    assert!(count("0.5", "series_small_kappa") > 0);
    assert!(count("5.0", "series_small_kappa") > 0);
    assert_eq!(count("50.0", "series_small_kappa"), 0);
    assert_eq!(count("", "tangent"), 241);

    let at = |kappa: &str, method: &str, eta: f64| {
        rows.iter()
            .find(|r| r["kappa"] == kappa && r["method"] == method && num(r, "eta") == eta)
            .map(|r| num(r, "F"))
            .unwrap()
    };
    assert_eq!(at("5.0", "exact", 0.0), 2.0);
    let gap = (at("50.0", "exact", 1.0) - at("50.0", "approx_large_kappa", 1.0)).abs();
    assert!(gap < 0.01, "{gap}");
}

#[test]
fn critical_reports_each_kappa_and_exits_on_failure() {
    let o = run(&["critical", "--kappa", "0,5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[no_critical_point]"), "{err}");
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0]["status"], "no_critical_point");
    assert!(num(&rows[0], "eta_c").is_nan());
    assert_eq!(rows[1]["status"], "ok");
    assert!((num(&rows[1], "f_min") - 1.5940468064).abs() < 1e-8);
}

#[test]
fn invert_rejects_values_outside_the_unit_interval() {
    for f in ["2.5", "1.0", "0.5"] {
        let o = run(&["invert", "--f-min", f]);
        assert_eq!(o.status.code(), Some(2), "f={f}");
        assert!(stderr(&o).starts_with("error[domain]"), "{}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
}

#[test]
fn invert_round_trips_through_critical() {
    let crit = run(&["critical", "--kappa", "5"]);
    assert!(crit.status.success());
    let f_min = csv_rows(&stdout(&crit))[0]["f_min"].clone();
    let inv = run(&["invert", "--f-min", &f_min, "--format", "json"]);
    assert!(inv.status.success(), "{}", stderr(&inv));
    let doc: Value = serde_json::from_str(&stdout(&inv)).unwrap();
    let kappa = doc["rows"][0]["kappa"].as_f64().unwrap();
    assert!((kappa / 5.0 - 1.0).abs() < 1e-3, "{kappa}");
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let args = |threads: &'static str| {
        vec![
            "simulate",
            "--realizations",
            "40",
            "--levels",
            "60",
            "--channels",
            "6",
            "--seed",
            "9",
            "--threads",
            threads,
            "--format",
            "json",
        ]
    };
    let a = run(&args("1"));
    let b = run(&args("3"));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let c = run(&[
        "simulate",
        "--realizations",
        "40",
        "--levels",
        "60",
        "--channels",
        "6",
        "--seed",
        "10",
        "--format",
        "json",
    ]);
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn simulate_compare_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let report = dir.path().join("report.json");
    let o = run(&[
        "simulate",
        "--ensemble",
        "poisson",
        "--realizations",
        "60",
        "--levels",
        "80",
        "--channels",
        "8",
        "--compare",
        "--z-threshold",
        "6",
        "--records",
        records.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["comparison"]["reference_f"], 2.0);
    assert_eq!(doc["comparison"]["passed"], true);
    assert_eq!(doc["n_realizations"], 60);
    let recs = csv_rows(&std::fs::read_to_string(&records).unwrap());
    assert_eq!(recs.len(), 60);
    assert!(recs.iter().all(|r| num(r, "unitarity_deficit") < 1e-10));
}

#[test]
fn simulate_compare_fails_with_statistical_exit_code() {
    // A zero threshold cannot be met.
    let o = run(&[
        "simulate",
        "--realizations",
        "20",
        "--levels",
        "40",
        "--channels",
        "4",
        "--compare",
        "--z-threshold",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[statistical]"), "{}", stderr(&o));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# comment\npoints = 3\nkappa = inf\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "formfactor", "--points", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 5);
    assert_eq!(num(&rows[1], "b2"), 0.5);
}

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["formfactor", "--kappa", "-1"]).status.code(), Some(2));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("Usage"));
}
