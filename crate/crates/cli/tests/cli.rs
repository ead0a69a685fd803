//! End-to-end tests of the `cetest` binary: exit codes, the JSON report
//! contract, determinism, and metric-file handling.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cetest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cetest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const REPORT_KEYS: [&str; 11] = [
    "version",
    "command",
    "mode",
    "verdict",
    "points",
    "residuals",
    "invariants",
    "coefficients",
    "k_vector",
    "diagnostics",
    "seconds",
];

fn assert_report_shape(value: &Value) {
    let map = value.as_object().expect("top-level object");
    let keys: Vec<&str> = map.keys().map(String::as_str).collect();
    assert_eq!(keys, REPORT_KEYS, "fixed top-level key order");
}

#[test]
fn classify_exit_codes_match_the_verdict() {
    let cases = [
        ("schwarzschild4", "conformally_einstein", 0),
        ("perturbed4", "not_conformally_einstein", 1),
        ("flat4", "degenerate_weyl", 3),
    ];
    for (metric, verdict, code) in cases {
        let out = cetest(&["classify", metric]);
        assert_eq!(out.status.code(), Some(code), "{metric}");
        let rep = report(&out);
        assert_report_shape(&rep);
        assert_eq!(rep["verdict"], verdict, "{metric}");
        assert_eq!(rep["command"], "classify");
        assert_eq!(rep["mode"], "float");
    }
}

#[test]
fn usage_errors_exit_with_code_two() {
    // Unknown metric name.
    let out = cetest(&["classify", "definitely_not_a_metric"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catalog"));

    // Unknown flag (handled by the argument parser).
    let out = cetest(&["classify", "flat4", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown method.
    let out = cetest(&["classify", "flat4", "--method", "dim9"]);
    assert_eq!(out.status.code(), Some(2));

    // Method/dimension mismatch.
    let out = cetest(&["classify", "flat4", "--method", "dim5"]);
    assert_eq!(out.status.code(), Some(2));

    // Identity filter that matches nothing.
    let out = cetest(&["verify", "--trials", "1", "--identity", "nonexistent"]);
    assert_eq!(out.status.code(), Some(2));

    // Signature of the wrong length.
    let out = cetest(&["verify", "--trials", "1", "--signature", "-++"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metric_files_parse_with_line_labelled_errors() {
    let dir = tempfile::tempdir().expect("tempdir");

    let good = dir.path().join("wave.metric");
    std::fs::write(
        &good,
        "[metric]\n\
         dimension = 4\n\
         coordinates = t, r, z, phi\n\n\
         [components]\n\
         g 0 0 = -(1 - 2/r)\n\
         g 1 1 = 1/(1 - 2/r)\n\
         g 2 2 = r^2/(1 - z^2)\n\
         g 3 3 = r^2*(1 - z^2)\n\n\
         [points]\n\
         a = 0, 4, 1/3, 0\n",
    )
    .unwrap();
    let out = cetest(&["classify", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep["verdict"], "conformally_einstein");
    assert_eq!(rep["points"][0]["label"], "a");

    let bad = dir.path().join("broken.metric");
    std::fs::write(
        &bad,
        "[metric]\ndimension = 4\ncoordinates = t, r, z, phi\n\n[components]\ng 3 1 = r\n",
    )
    .unwrap();
    let out = cetest(&["classify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6"), "error should carry the line: {err}");
}

#[test]
fn exact_reports_are_byte_identical_across_runs() {
    let args = ["verify", "--dim", "4", "--trials", "2", "--seed", "9", "--mode", "exact"];
    let first = cetest(&args);
    let second = cetest(&args);
    assert_eq!(first.status.code(), Some(0));
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout);

    let args = ["invariants", "tangherlini5", "--point", "p1", "--mode", "exact"];
    let first = cetest(&args);
    let second = cetest(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn json_flag_redirects_the_report_to_a_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("report.json");
    let out = cetest(&["catalog", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty(), "stdout stays clean with --json");
    let text = std::fs::read_to_string(&path).expect("report file");
    let rep: Value = serde_json::from_str(&text).expect("valid JSON");
    assert_report_shape(&rep);
    let names: Vec<&str> = rep["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"schwarzschild4"));
    assert!(names.contains(&"desitter6_poly"));
}

#[test]
fn invariants_report_carries_exact_values() {
    let out = cetest(&["invariants", "tangherlini5", "--point", "p1", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert_report_shape(&rep);
    assert_eq!(rep["verdict"], "nondegenerate");
    let inv = rep["invariants"].as_array().unwrap();
    assert_eq!(inv.len(), 9, "traces for orders 2..=10");
    assert_eq!(inv[0]["order"], 2);
    assert_eq!(inv[0]["value"], "9/2048");
    let coeff = rep["coefficients"].as_array().unwrap();
    assert_eq!(coeff[0]["order"], 2);
    assert_eq!(coeff[0]["value"], "-9/4096");
    assert_eq!(rep["diagnostics"][0]["nondegenerate"], true);
}

#[test]
fn verify_reports_failures_for_negative_controls_only() {
    let out = cetest(&[
        "verify", "--dim", "5", "--trials", "2", "--seed", "1", "--mode", "exact",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_report_shape(&rep);
    assert_eq!(rep["verdict"], "pass");
    let rows = rep["residuals"].as_array().unwrap();
    assert!(!rows.is_empty());
    for row in rows {
        assert_eq!(row["satisfied"], true);
        if row["expected_pass"] == false {
            assert_eq!(row["pass"], false, "control must fail: {row}");
        }
    }

    // The identity filter narrows the rows.
    let out = cetest(&[
        "verify", "--dim", "4", "--trials", "1", "--seed", "1", "--mode", "exact",
        "--identity", "four_dim_trace",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    let rows = rep["residuals"].as_array().unwrap();
    assert_eq!(rows.len(), 5, "five trace projections at n = 4");
    for row in rows {
        let label = row["label"].as_str().unwrap();
        assert!(label.contains("four_dim_trace"), "{label}");
    }
}

#[test]
fn every_catalog_entry_parses_and_serializes() {
    let out = cetest(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&out);
    assert_report_shape(&rep);
    let entries = rep["diagnostics"].as_array().unwrap();
    assert_eq!(entries.len(), 45);
    for e in entries {
        let dim = e["dimension"].as_u64().unwrap();
        assert!((4..=8).contains(&dim), "{e}");
        assert!(e["points"].as_u64().unwrap() >= 3);
    }
    // Conformal variants carry their factor.
    let poly: Vec<&Value> = entries
        .iter()
        .filter(|e| e["name"].as_str().unwrap().ends_with("_poly"))
        .collect();
    assert!(!poly.is_empty());
    for e in poly {
        assert!(e["conformal"].as_str().unwrap().contains("x"), "{e}");
    }
}

#[test]
fn exact_mode_rejects_transcendental_factors() {
    // exp() in the conformal factor cannot be evaluated exactly.
    let out = cetest(&["classify", "schwarzschild4_exp", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("float"), "hint at float mode: {err}");
}

#[test]
fn help_and_version_are_available() {
    let out = cetest(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in ["verify", "classify", "invariants", "catalog"] {
        assert!(help.contains(sub), "{sub} listed in help");
    }
    let out = cetest(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn flat_metric_files_never_crash_in_either_mode() {
    for mode in ["float", "exact"] {
        for n in 4..=8 {
            let name = format!("flat{n}");
            let out = cetest(&["classify", &name, "--mode", mode]);
            assert_eq!(out.status.code(), Some(3), "{name} {mode}");
            let rep = report(&out);
            assert_eq!(rep["verdict"], "degenerate_weyl");
        }
    }
}

#[test]
fn missing_file_reads_fall_back_to_catalog_then_error() {
    // A path-like argument that exists as neither file nor catalog entry.
    let out = cetest(&["classify", "/nonexistent/path/metric.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(Path::new("/nonexistent/path/metric.txt").exists() == false);
}
