//! `cetest` — conformal Einstein classification from the command line.
//!
//! Four subcommands, one report shape:
//! - `verify`: run the dimension-dependent identity suite on random Weyl
//!   tensors (positives and negative controls) and report residuals.
//! - `classify`: decide whether a metric, given as a file or a catalog
//!   name, is locally conformally Einstein.
//! - `invariants`: print the Weyl chain traces, characteristic
//!   coefficients and the nondegeneracy flag at one sample point.
//! - `catalog`: list the built-in metrics.
//!
//! Every run emits a JSON report with a fixed top-level key set
//! (`version`, `command`, `mode`, `verdict`, `points`, `residuals`,
//! `invariants`, `coefficients`, `k_vector`, `diagnostics`, `seconds`) to
//! stdout, or to the `--json` path with stdout left clean. Human-readable
//! summaries go to stderr. In exact mode `seconds` is pinned to `0.0` so
//! that identical invocations produce byte-identical reports.
//!
//! Exit codes: 0 success / conformally Einstein, 1 identity failure or
//! not conformally Einstein, 2 usage or input errors, 3 degenerate Weyl
//! tensor, 4 inconclusive.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use cetest_core::catalog;
use cetest_core::conformal::{
    classify, effective_relative, ClassifyOptions, ExtractionMethod, DEFAULT_TOLERANCE,
    DEGENERACY_TOL,
};
use cetest_core::curvature::{curvature_bundle, evaluate_field, evaluate_metric};
use cetest_core::identities::{identity_suite, random_weyl, SuiteEntry, WeylSampleConfig};
use cetest_core::metricfile::{rational_to_string, MetricFile};
use cetest_core::symexpr::expr_to_string;
use cetest_core::tensor::ResidualReport;
use cetest_core::weyl::{characteristic_coefficients, nondegeneracy_with, WeylPoint};
use cetest_core::{Error, Mode, Result, Scalar};

// ---------------------------------------------------------------------------
// command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "cetest",
    version,
    about = "Decide whether a metric is conformally Einstein (dimensions 4..8)",
    after_help = "Exit codes: 0 pass/conformally Einstein, 1 fail/not conformally \
                  Einstein, 2 usage or input error, 3 degenerate Weyl tensor, 4 inconclusive."
)]
struct Cli {
    /// Arithmetic mode: exact rationals or f64.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Float)]
    mode: ModeArg,

    /// Base seed for randomized samples (trial t uses seed + t).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Relative tolerance for the classification residuals.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,

    /// Write the JSON report to this path instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Conformal-vector extraction route: general, dim4[:order], dim5,
    /// dim6, or lovelock. Default: the lowest-order route for the
    /// metric's dimension (most accurate in float arithmetic).
    #[arg(long, global = true, value_name = "METHOD")]
    method: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dimensional identity suite on random Weyl tensors.
    Verify {
        /// Dimension of the samples (4..=8).
        #[arg(long, default_value_t = 4)]
        dim: usize,

        /// Number of random samples; sample t uses seed + t.
        #[arg(long, default_value_t = 20)]
        trials: usize,

        /// Restrict to suite rows whose label contains this substring.
        #[arg(long)]
        identity: Option<String>,

        /// Metric signature as +/- characters, e.g. "-+++" (the default)
        /// or "++++".
        #[arg(long, allow_hyphen_values = true)]
        signature: Option<String>,
    },
    /// Classify a metric as conformally Einstein or not.
    Classify {
        /// Path to a metric file, or the name of a catalog entry.
        metric: String,
    },
    /// Print chain traces, characteristic coefficients and nondegeneracy.
    Invariants {
        /// Path to a metric file, or the name of a catalog entry.
        metric: String,

        /// Label of the sample point to use (default: the first one).
        #[arg(long)]
        point: Option<String>,
    },
    /// List the built-in metrics.
    Catalog,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Float,
}

impl ModeArg {
    fn core(self) -> Mode {
        match self {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Float => Mode::Float,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Exact => "exact",
            ModeArg::Float => "float",
        }
    }
}

// ---------------------------------------------------------------------------
// report plumbing
// ---------------------------------------------------------------------------

/// Fresh report with every top-level key present, in the fixed order.
fn new_report(cli: &Cli, command_name: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command_name));
    m.insert("mode".into(), json!(cli.mode.name()));
    m.insert("verdict".into(), Value::Null);
    m.insert("points".into(), json!([]));
    m.insert("residuals".into(), json!([]));
    m.insert("invariants".into(), json!([]));
    m.insert("coefficients".into(), json!([]));
    m.insert("k_vector".into(), Value::Null);
    m.insert("diagnostics".into(), json!([]));
    m.insert("seconds".into(), json!(0.0));
    m
}

/// JSON for an f64 that may be non-finite (JSON has no inf/nan literals).
fn float_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::String("nan".into())
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// Exact scalars render as rational strings, floats as JSON numbers.
fn scalar_json(s: &Scalar) -> Value {
    match s {
        Scalar::Exact(r) => Value::String(rational_to_string(r)),
        Scalar::Float(v) => float_json(*v),
    }
}

fn residual_json(r: &ResidualReport) -> Value {
    json!({
        "absolute": scalar_json(&r.absolute),
        "relative": r.relative.map(float_json).unwrap_or(Value::Null),
        "effective": float_json(effective_relative(r)),
    })
}

fn emit(report: &Map<String, Value>, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Value::Object(report.clone()))
        .map_err(|e| Error::Invalid(format!("report serialization failed: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::Invalid(format!("cannot write `{}`: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Load a metric from a file path if one exists, otherwise from the catalog.
fn load_metric(arg: &str) -> Result<(String, MetricFile)> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read `{arg}`: {e}")))?;
        let label = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("metric")
            .to_string();
        return Ok((label, MetricFile::parse(&text)?));
    }
    match catalog::find(arg) {
        Ok(entry) => {
            let mf = entry.metric_file()?;
            Ok((entry.name, mf))
        }
        Err(_) => Err(Error::Invalid(format!(
            "`{arg}` is neither a readable metric file nor a catalog entry \
             (run `cetest catalog` for the list)"
        ))),
    }
}

fn parse_signature(text: &str, dim: usize) -> Result<Vec<i8>> {
    let sig: Vec<i8> = text
        .chars()
        .map(|c| match c {
            '+' => Ok(1i8),
            '-' => Ok(-1i8),
            other => Err(Error::Invalid(format!(
                "signature may only contain `+` and `-`, found `{other}`"
            ))),
        })
        .collect::<Result<_>>()?;
    if sig.len() != dim {
        return Err(Error::Invalid(format!(
            "signature `{text}` has {} entries but the dimension is {dim}",
            sig.len()
        )));
    }
    Ok(sig)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct RowAggregate {
    label: String,
    expected_pass: bool,
    satisfied: usize,
    worst_relative: f64,
}

fn cmd_verify(
    cli: &Cli,
    dim: usize,
    trials: usize,
    identity: Option<&str>,
    signature: Option<&str>,
) -> Result<(Map<String, Value>, u8)> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let mode = cli.mode.core();
    let sig = match signature {
        Some(s) => parse_signature(s, dim)?,
        None => {
            if !(4..=8).contains(&dim) {
                return Err(Error::Dimension(dim));
            }
            let mut v = vec![1i8; dim];
            v[0] = -1;
            v
        }
    };

    // Trials are independent; each draws its own sample from seed + t.
    let suites: Vec<(u64, Vec<SuiteEntry>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = cli.seed.wrapping_add(t);
            let cfg = WeylSampleConfig::new(dim, sig.clone(), seed, mode);
            let w = random_weyl(&cfg)?;
            Ok((seed, identity_suite(&w)?))
        })
        .collect::<Result<_>>()?;

    let selected = |label: &str| identity.map_or(true, |f| label.contains(f));
    if !suites[0].1.iter().any(|e| selected(&e.report.label)) {
        return Err(Error::Invalid(format!(
            "no identity row matching `{}` at dimension {dim}",
            identity.unwrap_or_default()
        )));
    }

    let mut aggregates: Vec<RowAggregate> = Vec::new();
    let mut residual_rows: Vec<Value> = Vec::new();
    let mut diagnostics: Vec<Value> = Vec::new();
    let mut all_satisfied = true;

    for (seed, suite) in &suites {
        for entry in suite {
            let label = &entry.report.label;
            if !selected(label) {
                continue;
            }
            let satisfied = entry.satisfied();
            all_satisfied &= satisfied;
            let worst = entry.report.worst_relative();

            let agg = match aggregates.iter_mut().find(|a| &a.label == label) {
                Some(a) => a,
                None => {
                    aggregates.push(RowAggregate {
                        label: label.clone(),
                        expected_pass: entry.expected_pass,
                        satisfied: 0,
                        worst_relative: 0.0,
                    });
                    aggregates.last_mut().unwrap()
                }
            };
            agg.satisfied += satisfied as usize;
            if entry.expected_pass {
                agg.worst_relative = agg.worst_relative.max(worst);
            }

            residual_rows.push(json!({
                "seed": seed,
                "label": label,
                "expected_pass": entry.expected_pass,
                "pass": entry.report.pass,
                "satisfied": satisfied,
                "worst_relative": float_json(worst),
            }));

            if !satisfied {
                for check in &entry.report.checks {
                    if check.pass == entry.expected_pass {
                        continue;
                    }
                    diagnostics.push(json!(format!(
                        "seed {seed}: `{label}` check `{}` {} (absolute {}, relative {})",
                        check.name,
                        if entry.expected_pass {
                            "failed"
                        } else {
                            "passed but is a negative control"
                        },
                        match scalar_json(&check.residual.absolute) {
                            Value::String(s) => s,
                            other => other.to_string(),
                        },
                        check
                            .residual
                            .relative
                            .map(|r| format!("{r:.3e}"))
                            .unwrap_or_else(|| "exact".into()),
                    )));
                }
            }
        }
    }

    let mut report = new_report(cli, "verify");
    report.insert(
        "verdict".into(),
        json!(if all_satisfied { "pass" } else { "fail" }),
    );
    report.insert("residuals".into(), Value::Array(residual_rows));
    report.insert("diagnostics".into(), Value::Array(diagnostics));

    eprintln!(
        "identity suite: dimension {dim}, {} mode, {trials} trial(s), seeds {}..={}",
        cli.mode.name(),
        cli.seed,
        cli.seed.wrapping_add(trials as u64 - 1)
    );
    for agg in &aggregates {
        let role = if agg.expected_pass {
            "expected to hold"
        } else {
            "negative control"
        };
        let worst = if agg.expected_pass {
            format!(", worst relative {:.3e}", agg.worst_relative)
        } else {
            String::new()
        };
        eprintln!(
            "  {:<38} {:>4}/{} satisfied ({role}{worst})",
            agg.label, agg.satisfied, trials
        );
    }
    eprintln!("verdict: {}", if all_satisfied { "pass" } else { "fail" });

    Ok((report, if all_satisfied { 0 } else { 1 }))
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn cmd_classify(cli: &Cli, metric: &str) -> Result<(Map<String, Value>, u8)> {
    let (label, mf) = load_metric(metric)?;
    let points = mf.sample_points();
    if points.is_empty() {
        return Err(Error::Invalid(format!(
            "metric `{label}` defines no sample points"
        )));
    }
    let spec = mf.to_metric_spec(&label)?;
    let method = match &cli.method {
        Some(name) => ExtractionMethod::parse(name)?,
        None => ExtractionMethod::preferred(spec.dimension)?,
    };
    let options = ClassifyOptions {
        method,
        mode: cli.mode.core(),
        tolerance: cli.tol,
    };
    let verdict = classify(&spec, &points, &options)?;

    let mut point_rows: Vec<Value> = Vec::new();
    let mut first_k: Option<Value> = None;
    for p in &verdict.points {
        if first_k.is_none() {
            if let Some(k) = &p.k_vector {
                first_k = Some(json!({
                    "point": p.label,
                    "components": k.iter().copied().map(float_json).collect::<Vec<_>>(),
                }));
            }
        }
        point_rows.push(json!({
            "label": p.label,
            "usable": p.usable,
            "healthy": p.healthy,
            "det_g": p.det_g.map(float_json).unwrap_or(Value::Null),
            "denominator": p.denominator.as_ref().map(|(name, v)| {
                json!({"name": name, "value": float_json(*v)})
            }).unwrap_or(Value::Null),
            "einstein": p.einstein.as_ref().map(residual_json).unwrap_or(Value::Null),
            "cspace": p.cspace.as_ref().map(residual_json).unwrap_or(Value::Null),
            "curl": p.curl.as_ref().map(residual_json).unwrap_or(Value::Null),
            "k_vector": p.k_vector.as_ref().map(|k| {
                Value::Array(k.iter().copied().map(float_json).collect())
            }).unwrap_or(Value::Null),
            "note": p.note.as_ref().map(|n| json!(n)).unwrap_or(Value::Null),
        }));
    }

    // Worst effective relative residual per condition across healthy points.
    let worst_of = |cond: fn(&cetest_core::conformal::PointReport) -> Option<&ResidualReport>| {
        verdict
            .points
            .iter()
            .filter(|p| p.healthy)
            .filter_map(|p| cond(p).map(effective_relative))
            .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    let conditions: [(&str, Option<f64>); 3] = [
        ("einstein", worst_of(|p| p.einstein.as_ref())),
        ("cspace", worst_of(|p| p.cspace.as_ref())),
        ("curl", worst_of(|p| p.curl.as_ref())),
    ];
    let mut residual_rows: Vec<Value> = Vec::new();
    for (name, worst) in conditions {
        residual_rows.push(json!({
            "condition": name,
            "worst_relative": worst.map(float_json).unwrap_or(Value::Null),
            "tolerance": cli.tol,
            "pass": worst.map(|w| json!(w < cli.tol)).unwrap_or(Value::Null),
        }));
    }

    let mut report = new_report(cli, "classify");
    report.insert("verdict".into(), json!(verdict.outcome.as_str()));
    report.insert("points".into(), Value::Array(point_rows));
    report.insert("residuals".into(), Value::Array(residual_rows));
    report.insert(
        "k_vector".into(),
        first_k.unwrap_or(Value::Null),
    );
    report.insert(
        "diagnostics".into(),
        Value::Array(verdict.notes.iter().map(|n| json!(n)).collect()),
    );

    eprintln!(
        "metric: {label} (dimension {}), method {}, {} mode, tolerance {:e}",
        spec.dimension,
        verdict.method.label(),
        cli.mode.name(),
        cli.tol
    );
    for p in &verdict.points {
        let status = if p.healthy {
            "healthy"
        } else if p.usable {
            "degenerate"
        } else {
            "unusable"
        };
        let conditions = match (&p.einstein, &p.curl) {
            (Some(e), Some(c)) => format!(
                ", einstein rel {:.3e}, curl rel {:.3e}",
                effective_relative(e),
                effective_relative(c)
            ),
            _ => String::new(),
        };
        let note = p
            .note
            .as_ref()
            .map(|n| format!(" ({n})"))
            .unwrap_or_default();
        eprintln!("  point {:<10} {status}{conditions}{note}", p.label);
    }
    for n in &verdict.notes {
        eprintln!("  note: {n}");
    }
    eprintln!("verdict: {}", verdict.outcome.as_str());

    let code = u8::try_from(verdict.outcome.exit_code()).unwrap_or(2);
    Ok((report, code))
}

// ---------------------------------------------------------------------------
// invariants
// ---------------------------------------------------------------------------

fn cmd_invariants(
    cli: &Cli,
    metric: &str,
    point: Option<&str>,
) -> Result<(Map<String, Value>, u8)> {
    let (label, mf) = load_metric(metric)?;
    let points = mf.sample_points();
    if points.is_empty() {
        return Err(Error::Invalid(format!(
            "metric `{label}` defines no sample points"
        )));
    }
    let sp = match point {
        Some(want) => points
            .iter()
            .find(|p| p.label == want)
            .ok_or_else(|| {
                Error::Invalid(format!("no sample point labelled `{want}` in `{label}`"))
            })?,
        None => &points[0],
    };
    let mode = cli.mode.core();
    let spec = mf.to_metric_spec(&label)?;
    if mode == Mode::Exact && spec.has_transcendental() {
        return Err(Error::TranscendentalInExact(
            "metric components (use float mode)".into(),
        ));
    }
    let bundle = curvature_bundle(&spec)?;
    let binding = spec.binding(&sp.coords, mode)?;
    let pm = evaluate_metric(&bundle.metric, &bundle.inverse, &binding)?;
    let cw = evaluate_field(&bundle.weyl22, &binding)?;
    let w = WeylPoint::new(pm, cw)?;
    let inv = characteristic_coefficients(&w);
    let nd = nondegeneracy_with(&w, &inv, DEGENERACY_TOL);
    let nb = w.bivector_count();

    let mut report = new_report(cli, "invariants");
    report.insert(
        "verdict".into(),
        json!(if nd.nondegenerate {
            "nondegenerate"
        } else {
            "degenerate_weyl"
        }),
    );
    report.insert(
        "points".into(),
        json!([{
            "label": sp.label,
            "coordinates": sp.coords.iter().map(|c| rational_to_string(c)).collect::<Vec<_>>(),
        }]),
    );
    report.insert(
        "invariants".into(),
        Value::Array(
            (2..=nb)
                .map(|p| json!({"order": p, "value": scalar_json(inv.trace(p))}))
                .collect(),
        ),
    );
    report.insert(
        "coefficients".into(),
        Value::Array(
            (2..=nb)
                .map(|k| json!({"order": k, "value": scalar_json(inv.coefficient(k))}))
                .collect(),
        ),
    );
    report.insert(
        "diagnostics".into(),
        json!([{
            "nondegenerate": nd.nondegenerate,
            "c_n": scalar_json(&nd.c_n),
            "scale": float_json(nd.scale),
            "threshold": float_json(nd.threshold),
        }]),
    );

    eprintln!(
        "invariants: {label} at point {} ({} mode, bivector dimension {nb})",
        sp.label,
        cli.mode.name()
    );
    for p in 2..=nb {
        eprintln!("  chain trace p={p:<2} {}", render_scalar(inv.trace(p)));
    }
    for k in 2..=nb {
        eprintln!(
            "  char coeff  k={k:<2} {}",
            render_scalar(inv.coefficient(k))
        );
    }
    eprintln!(
        "nondegenerate: {} (c_N = {})",
        nd.nondegenerate,
        render_scalar(&nd.c_n)
    );

    Ok((report, 0))
}

fn render_scalar(s: &Scalar) -> String {
    match s {
        Scalar::Exact(r) => rational_to_string(r),
        Scalar::Float(v) => format!("{v:.12e}"),
    }
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

fn cmd_catalog(cli: &Cli) -> Result<(Map<String, Value>, u8)> {
    let entries = catalog::catalog();
    let mut rows: Vec<Value> = Vec::new();
    eprintln!("built-in metrics ({}):", entries.len());
    for e in &entries {
        let mf = e.metric_file()?;
        let omega = mf.conformal.as_ref().map(expr_to_string);
        rows.push(json!({
            "name": e.name,
            "dimension": mf.dimension,
            "points": mf.points.len(),
            "conformal": omega.as_ref().map(|o| json!(o)).unwrap_or(Value::Null),
            "description": e.description,
        }));
        let marker = omega
            .as_ref()
            .map(|o| format!(" [omega = {o}]"))
            .unwrap_or_default();
        eprintln!("  {:<24} {}d  {}{marker}", e.name, mf.dimension, e.description);
    }

    let mut report = new_report(cli, "catalog");
    report.insert("verdict".into(), json!("ok"));
    report.insert("diagnostics".into(), Value::Array(rows));
    Ok((report, 0))
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

fn run(cli: &Cli) -> Result<(Map<String, Value>, u8)> {
    match &cli.command {
        Command::Verify {
            dim,
            trials,
            identity,
            signature,
        } => cmd_verify(
            cli,
            *dim,
            *trials,
            identity.as_deref(),
            signature.as_deref(),
        ),
        Command::Classify { metric } => cmd_classify(cli, metric),
        Command::Invariants { metric, point } => {
            cmd_invariants(cli, metric, point.as_deref())
        }
        Command::Catalog => cmd_catalog(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match run(&cli) {
        Ok((mut report, code)) => {
            // Exact runs must be reproducible byte for byte, so the timing
            // field is pinned there; float runs report real wall time.
            let seconds = if cli.mode == ModeArg::Exact {
                0.0
            } else {
                started.elapsed().as_secs_f64()
            };
            report.insert("seconds".into(), json!(seconds));
            if let Err(e) = emit(&report, cli.json.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
