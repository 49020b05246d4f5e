//! End-to-end tests driving the compiled binary: artifact shape,
//! reproducibility, exit codes, and numerical agreement with closed forms.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levygraph::series::exp_trunc;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_levygraph");

/// Reference jump-diffusion model: two-per-unit-time positive jumps of
/// size six over a diffusive floor.
const REF_MODEL: &str =
    r#"{"dim":1,"jump_diffusion":{"z1":2.0,"z2":0.0,"s1":6.0,"s2":1.0,"beta":0.2,"a":12.0}}"#;

/// Pure diffusion in jump-diffusion form (zero activity).
const GAUSS_MODEL: &str =
    r#"{"dim":1,"jump_diffusion":{"z1":0.0,"z2":0.0,"s1":6.0,"s2":1.0,"beta":0.5,"a":0.3}}"#;

/// Diffusion with an explicit quadratic potential, for the expansion
/// surface.
const DIFF_POT_MODEL: &str = r#"{"dim":1,
  "levy":{"diffusion":[[0.7]],"activity":0.0},
  "potential":{"coeffs":[{"degree":2,"entries":[{"index":[1,1],"value":1.0}]}]}}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().expect("tempdir"),
        }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, contents).expect("write model");
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn run_with_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    // Isolate from any ambient seed override.
    cmd.env_remove("LEVYGRAPH_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn binary")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Parses a CSV artifact into (config comment lines, header, numeric rows).
fn parse_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let mut comments = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            comments.push(rest.to_string());
        } else if header.is_empty() {
            header = line.split(',').map(|s| s.to_string()).collect();
        } else {
            rows.push(
                line.split(',')
                    .map(|s| s.parse::<f64>().expect("numeric cell"))
                    .collect(),
            );
        }
    }
    (comments, header, rows)
}

fn model_arg(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// Exit codes and diagnostics
// ---------------------------------------------------------------------------

#[test]
fn usage_errors_exit_two_with_category() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);
    let missing = ws.path("missing.json").display().to_string();
    let bad_json = ws.file("bad.json", "{ not json");
    let bad_json = model_arg(&bad_json);

    let cases: Vec<Vec<&str>> = vec![
        // Empty grid: upper bound below lower bound.
        vec!["density", "--model", &model, "--grid", "5:1:1"],
        // Missing grid entirely.
        vec!["density", "--model", &model],
        // Unparseable resummation selector.
        vec!["density", "--model", &model, "--grid", "0:1:1", "--resum", "junk"],
        // Padé degrees exceeding the series order.
        vec!["density", "--model", &model, "--grid", "0:1:1", "--resum", "pade:2/1"],
        // Order above the cap.
        vec!["expand", "--model", &model, "--order", "9", "--grid", "0:1:1"],
        // Comparison sample size below the minimum.
        vec!["compare", "--model", &model, "--n", "10"],
        // Quantile level outside (0, 1).
        vec!["quantiles", "--model", &model, "--alpha", "1.5"],
        // Nonexistent and malformed model files.
        vec!["density", "--model", &missing, "--grid", "0:1:1"],
        vec!["density", "--model", &bad_json, "--grid", "0:1:1"],
        // Fast path computes the raw series only.
        vec!["expand", "--model", &model, "--grid", "0:1:1", "--log", "--d1-fast"],
    ];
    for case in cases {
        let out = run(&case);
        assert_eq!(exit_code(&out), 2, "expected usage failure for {case:?}");
        assert!(
            stderr_of(&out).contains("error[usage]:"),
            "diagnostic category missing for {case:?}: {}",
            stderr_of(&out)
        );
        assert!(stdout_of(&out).is_empty(), "no artifact on failure");
    }

    // Bare clap parse errors (unknown flags) also exit 2.
    let out = run(&["density", "--nonsense"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn runtime_failures_exit_one_with_category() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);

    // The truncated (partial-sum) log-density grows at large distance, so
    // its normalization integral overflows: an honest runtime failure.
    let out = run(&[
        "quantiles", "--model", &model, "--resum", "partial", "--alpha", "0.99",
    ]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(
        err.starts_with("error[") && err.contains("]:"),
        "diagnostic must be machine-readable: {err}"
    );
}

#[test]
fn help_and_version_exit_zero() {
    for flags in [["--help"], ["--version"]] {
        let out = run(&flags);
        assert_eq!(exit_code(&out), 0);
    }
}

// ---------------------------------------------------------------------------
// expand
// ---------------------------------------------------------------------------

/// Taylor coefficients of the pure-diffusion density against a quadratic
/// potential: `(1+4*mu*t*b)^(-1/2) * exp(-b*phi^2 / (1+4*mu*t*b))`,
/// computed through the logarithm's elementary series.
fn gaussian_reference_coeffs(mu: f64, t: f64, phi: f64, order: usize) -> Vec<f64> {
    let u = 4.0 * mu * t;
    let mut log_coeffs = vec![0.0; order + 1];
    for (k, slot) in log_coeffs.iter_mut().enumerate().skip(1) {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let from_sqrt = -0.5 * sign * u.powi(k as i32) / k as f64;
        let from_exp = -phi * phi * (-u).powi(k as i32 - 1);
        *slot = from_sqrt + from_exp;
    }
    exp_trunc(&log_coeffs, order)
}

#[test]
fn expand_matches_pure_diffusion_closed_form() {
    let ws = Workspace::new();
    let model = ws.file("diff.json", DIFF_POT_MODEL);
    let model = model_arg(&model);

    for extra in [&[][..], &["--d1-fast"][..]] {
        let mut args = vec![
            "expand", "--model", &model, "--order", "3", "--grid", "-0.9:0.9:0.9",
        ];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        let (_, header, rows) = parse_csv(&stdout_of(&out));
        assert_eq!(header, ["phi", "h0", "h1", "h2", "h3"]);
        assert_eq!(rows.len(), 3);
        for row in &rows {
            let phi = row[0];
            let want = gaussian_reference_coeffs(0.7, 1.0, phi, 3);
            for (k, &w) in want.iter().enumerate() {
                assert!(
                    (row[k + 1] - w).abs() <= 1e-10 * w.abs().max(1.0),
                    "h{k}(phi={phi}) = {} want {w}",
                    row[k + 1]
                );
            }
        }
    }
}

#[test]
fn expand_order_zero_rows_are_unit() {
    let ws = Workspace::new();
    let model = ws.file("diff.json", DIFF_POT_MODEL);
    let out = run(&[
        "expand",
        "--model",
        &model_arg(&model),
        "--order",
        "0",
        "--grid",
        "0:1:0.5",
    ]);
    assert_eq!(exit_code(&out), 0);
    let (_, header, rows) = parse_csv(&stdout_of(&out));
    assert_eq!(header, ["phi", "h0"]);
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row[1], 1.0);
    }
}

#[test]
fn expand_log_series_is_log_of_raw_series() {
    let ws = Workspace::new();
    let model = ws.file("diff.json", DIFF_POT_MODEL);
    let model = model_arg(&model);
    let raw = run(&[
        "expand", "--model", &model, "--order", "3", "--grid", "0.6:0.6:1",
    ]);
    let log = run(&[
        "expand", "--model", &model, "--order", "3", "--grid", "0.6:0.6:1", "--log",
    ]);
    let (_, _, raw_rows) = parse_csv(&stdout_of(&raw));
    let (_, log_header, log_rows) = parse_csv(&stdout_of(&log));
    assert_eq!(log_header, ["phi", "g0", "g1", "g2", "g3"]);
    let h = &raw_rows[0][1..];
    let g = &log_rows[0][1..];
    // g1 = h1, g2 = h2 - h1^2/2, g3 = h3 - h1 h2 + h1^3/3.
    assert!((g[0] - 0.0).abs() < 1e-15);
    assert!((g[1] - h[1]).abs() < 1e-12);
    assert!((g[2] - (h[2] - 0.5 * h[1] * h[1])).abs() < 1e-12);
    assert!((g[3] - (h[3] - h[1] * h[2] + h[1].powi(3) / 3.0)).abs() < 1e-12);
}

#[test]
fn expand_large_diffusion_log_reference_values() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let out = run(&[
        "expand",
        "--model",
        &model_arg(&model),
        "--large-diffusion",
        "--log",
        "--order",
        "2",
        "--grid",
        "0:0:1",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, header, rows) = parse_csv(&stdout_of(&out));
    assert_eq!(header, ["phi", "g0", "g1", "g2"]);
    // At the centered origin: g1 = -(t z r2) = -72 and g2 is half of
    // (t z r4 + 2 (t z r2)^2) = (2592 + 10368) / 2 = 6480.
    assert_eq!(rows[0], vec![0.0, 0.0, -72.0, 6480.0]);
}

#[test]
fn expand_routes_jump_diffusion_models_to_normal_form() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    // No mode flag: a model with only a jump-diffusion section has no
    // potential, so its series is the normal-form one.
    let out = run(&[
        "expand",
        "--model",
        &model_arg(&model),
        "--log",
        "--order",
        "2",
        "--grid",
        "0:0:1",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let artifact = stdout_of(&out);
    assert!(artifact.contains("mode: \"large-diffusion-log\""));
    let (_, _, rows) = parse_csv(&artifact);
    assert_eq!(rows[0], vec![0.0, 0.0, -72.0, 6480.0]);
}

#[test]
fn expand_large_diffusion_fast_path_agrees() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);
    let slow = run(&[
        "expand", "--model", &model, "--large-diffusion", "--order", "2", "--grid",
        "-1.5:1.5:0.75",
    ]);
    let fast = run(&[
        "expand", "--model", &model, "--large-diffusion", "--d1-fast", "--order", "2", "--grid",
        "-1.5:1.5:0.75",
    ]);
    assert_eq!(exit_code(&slow), 0);
    assert_eq!(exit_code(&fast), 0);
    let (_, _, slow_rows) = parse_csv(&stdout_of(&slow));
    let (_, _, fast_rows) = parse_csv(&stdout_of(&fast));
    assert_eq!(slow_rows.len(), 5);
    for (s, f) in slow_rows.iter().zip(&fast_rows) {
        for (a, b) in s.iter().zip(f) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

#[test]
fn density_of_pure_diffusion_matches_exact_normal() {
    let ws = Workspace::new();
    let model = ws.file("gauss.json", GAUSS_MODEL);
    let out = run(&[
        "density",
        "--model",
        &model_arg(&model),
        "--grid",
        "-3:4:0.25",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, header, rows) = parse_csv(&stdout_of(&out));
    assert_eq!(header, ["phi", "log_density", "density"]);
    let (beta, mean) = (0.5, 0.3);
    let norm = (beta / std::f64::consts::PI).sqrt();
    for row in &rows {
        let x = row[0];
        let exact = norm * (-beta * (x - mean) * (x - mean)).exp();
        assert!(
            (row[2] - exact).abs() <= 1e-6,
            "density({x}) = {} want {exact}",
            row[2]
        );
    }
}

#[test]
fn density_rows_integrate_to_one() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    // Wide grid around the mean (24) with a fine step: the trapezoid sum
    // of the normalized column should be close to 1.
    let out = run(&[
        "density",
        "--model",
        &model_arg(&model),
        "--grid",
        "-60:110:0.25",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, _, rows) = parse_csv(&stdout_of(&out));
    let mut mass = 0.0;
    for pair in rows.windows(2) {
        let dx = pair[1][0] - pair[0][0];
        mass += 0.5 * dx * (pair[0][2] + pair[1][2]);
    }
    assert!((mass - 1.0).abs() < 1e-3, "total mass {mass}");
}

#[test]
fn density_of_jump_model_peaks_in_the_bulk() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let out = run(&[
        "density",
        "--model",
        &model_arg(&model),
        "--grid",
        "0:48:0.5",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, _, rows) = parse_csv(&stdout_of(&out));

    // Pinned value at the centered origin (x = mean = 24): the
    // second-order [1/1] log-density is exactly -14.4/19 there.
    let at_mean = rows.iter().find(|r| r[0] == 24.0).expect("grid hits 24");
    assert!(
        (at_mean[1] - (-14.4 / 19.0)).abs() < 1e-12,
        "log-density at the mean: {}",
        at_mean[1]
    );

    // The smooth resummed curve peaks in the bulk of the jump mixture
    // (between the dominant mixture bumps at 24 and 30) and is unimodal
    // along the grid.
    let (argmax, _) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1[2].total_cmp(&b.1[2]))
        .unwrap();
    let peak_x = rows[argmax][0];
    assert!(
        (24.0..=30.0).contains(&peak_x),
        "peak at {peak_x}, expected within the dominant bumps"
    );
    for (i, pair) in rows.windows(2).enumerate() {
        if i < argmax {
            assert!(pair[1][2] >= pair[0][2], "rising flank dips at {}", pair[1][0]);
        } else {
            assert!(pair[1][2] <= pair[0][2], "falling flank rises at {}", pair[1][0]);
        }
    }
}

#[test]
fn density_methods_agree_where_all_converge() {
    let ws = Workspace::new();
    let model = ws.file("gauss.json", GAUSS_MODEL);
    let model = model_arg(&model);
    // For zero activity the log series terminates, so every method gives
    // the same table.
    let base = run(&["density", "--model", &model, "--grid", "-1:1:0.5"]);
    for method in ["partial", "borel:16"] {
        let other = run(&[
            "density", "--model", &model, "--grid", "-1:1:0.5", "--resum", method,
        ]);
        assert_eq!(exit_code(&other), 0);
        let (_, _, a) = parse_csv(&stdout_of(&base));
        let (_, _, b) = parse_csv(&stdout_of(&other));
        for (x, y) in a.iter().zip(&b) {
            assert!((x[1] - y[1]).abs() < 1e-12 && (x[2] - y[2]).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// quantiles
// ---------------------------------------------------------------------------

#[test]
fn quantiles_of_pure_diffusion_match_normal_inverse() {
    let ws = Workspace::new();
    let model = ws.file("gauss.json", GAUSS_MODEL);
    let out = run(&[
        "quantiles",
        "--model",
        &model_arg(&model),
        "--alpha",
        "0.5,0.99",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, header, rows) = parse_csv(&stdout_of(&out));
    assert_eq!(header, ["alpha", "predicted", "gaussian"]);
    // beta = 0.5 gives unit variance; the 99% standard normal quantile.
    let want = [0.3, 0.3 + 2.3263478740408408];
    for (row, want) in rows.iter().zip(want) {
        assert!(
            (row[1] - want).abs() < 1e-4,
            "predicted {} want {want}",
            row[1]
        );
        assert!((row[2] - want).abs() < 1e-9);
    }
}

#[test]
fn quantiles_of_jump_model_sit_above_gaussian_in_the_tail() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let out = run(&[
        "quantiles",
        "--model",
        &model_arg(&model),
        "--alpha",
        "0.99",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, _, rows) = parse_csv(&stdout_of(&out));
    let (predicted, gaussian) = (rows[0][1], rows[0][2]);
    // Positive jumps fatten the upper tail: the skew-aware prediction
    // must exceed the matched-moments Gaussian baseline.
    assert!(
        predicted > gaussian + 1.0,
        "predicted {predicted} gaussian {gaussian}"
    );
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[test]
fn simulate_writes_config_header_and_values() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let out_path = ws.path("sample.csv");
    let out = run(&[
        "simulate",
        "--model",
        &model_arg(&model),
        "--n",
        "50",
        "--seed",
        "3",
        "--out",
        &out_path.display().to_string(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).is_empty(), "artifact goes to --out only");

    let text = std::fs::read_to_string(&out_path).expect("artifact written");
    let (comments, header, rows) = parse_csv(&text);
    assert_eq!(header, ["value"]);
    assert_eq!(rows.len(), 50);
    assert!(comments.iter().any(|c| c == "seed: 3"));
    assert!(comments.iter().any(|c| c == "command: \"simulate\""));
    // The embedded model round-trips as JSON.
    let model_line = comments
        .iter()
        .find_map(|c| c.strip_prefix("model: "))
        .expect("model embedded");
    let parsed: serde_json::Value = serde_json::from_str(model_line).expect("valid JSON");
    assert_eq!(parsed["jump_diffusion"]["beta"], 0.2);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);
    let args = ["simulate", "--model", &model, "--n", "200", "--seed", "7"];
    let first = stdout_of(&run(&args));
    let second = stdout_of(&run(&args));
    assert_eq!(first, second, "fixed seed must be byte-identical");

    let other = stdout_of(&run(&[
        "simulate", "--model", &model, "--n", "200", "--seed", "8",
    ]));
    assert_ne!(first, other, "different seed must change the sample");
}

#[test]
fn env_seed_overrides_flag() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);
    let with_env = run_with_env(
        &["simulate", "--model", &model, "--n", "20", "--seed", "3"],
        &[("LEVYGRAPH_SEED", "9")],
    );
    let with_flag = run(&["simulate", "--model", &model, "--n", "20", "--seed", "9"]);
    let with_three = run(&["simulate", "--model", &model, "--n", "20", "--seed", "3"]);
    assert_eq!(stdout_of(&with_env), stdout_of(&with_flag));
    assert_ne!(stdout_of(&with_env), stdout_of(&with_three));

    // An unparseable override is a usage error, not a silent fallback.
    let bad = run_with_env(
        &["simulate", "--model", &model, "--n", "20"],
        &[("LEVYGRAPH_SEED", "not-a-number")],
    );
    assert_eq!(exit_code(&bad), 2);
    assert!(stderr_of(&bad).contains("error[usage]:"));
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[test]
fn compare_is_reproducible_and_beats_gaussian_in_the_tail() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let model = model_arg(&model);
    let args = [
        "compare", "--model", &model, "--n", "20000", "--seed", "1", "--alpha", "0.99",
    ];
    let first = run(&args);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_of(&first));
    let second = run(&args);
    assert_eq!(stdout_of(&first), stdout_of(&second));

    let (_, header, rows) = parse_csv(&stdout_of(&first));
    assert_eq!(
        header,
        [
            "alpha",
            "empirical",
            "predicted",
            "gaussian",
            "predicted_abs_err",
            "gaussian_abs_err"
        ]
    );
    let row = &rows[0];
    assert!(
        row[4] < row[5],
        "prediction should beat the Gaussian baseline: {row:?}"
    );
}

#[test]
fn compare_zero_activity_prediction_collapses_to_gaussian() {
    let ws = Workspace::new();
    let model = ws.file("gauss.json", GAUSS_MODEL);
    let out = run(&[
        "compare",
        "--model",
        &model_arg(&model),
        "--n",
        "5000",
        "--seed",
        "2",
        "--alpha",
        "0.5,0.9,0.99",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (_, _, rows) = parse_csv(&stdout_of(&out));
    for row in &rows {
        // Without jumps the two predictions are the same number, and both
        // should sit within Monte Carlo error of the empirical quantile.
        assert_eq!(row[2], row[3], "prediction must equal the baseline");
        assert!(row[5] < 0.15, "baseline far from empirical: {row:?}");
    }
}

#[test]
fn compare_sweep_prediction_dominates_across_activities() {
    let ws = Workspace::new();
    // The activity sweep: a = 6 z1, jumps of size 6, diffusive floor
    // beta = 0.2. The tail prediction should beat (or tie, at zero
    // activity) the Gaussian baseline in at least four of five cases.
    let mut wins = 0;
    for (i, z1) in [0.0, 0.5, 1.0, 1.5, 2.0].into_iter().enumerate() {
        let text = format!(
            r#"{{"dim":1,"jump_diffusion":{{"z1":{z1},"z2":0.0,"s1":6.0,"s2":1.0,"beta":0.2,"a":{}}}}}"#,
            6.0 * z1
        );
        let model = ws.file(&format!("sweep{i}.json"), &text);
        let out = run(&[
            "compare",
            "--model",
            &model_arg(&model),
            "--n",
            "20000",
            "--seed",
            "1",
            "--alpha",
            "0.99",
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        let (_, _, rows) = parse_csv(&stdout_of(&out));
        let row = &rows[0];
        if row[4] <= row[5] {
            wins += 1;
        }
    }
    assert!(wins >= 4, "prediction won only {wins}/5 sweep cases");
}

// ---------------------------------------------------------------------------
// artifact formats
// ---------------------------------------------------------------------------

#[test]
fn json_artifact_is_valid_and_self_describing() {
    let ws = Workspace::new();
    let model = ws.file("ref.json", REF_MODEL);
    let out = run(&[
        "density",
        "--model",
        &model_arg(&model),
        "--grid",
        "20:28:4",
        "--format",
        "json",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid JSON");
    assert_eq!(doc["config"]["command"], "density");
    assert_eq!(doc["config"]["resum"], "pade:1/1");
    assert_eq!(doc["config"]["grid"], "20:28:4");
    assert_eq!(doc["config"]["t"], 1.0);
    assert_eq!(doc["config"]["model"]["jump_diffusion"]["z1"], 2.0);
    let columns = doc["columns"].as_array().expect("columns");
    let rows = doc["rows"].as_array().expect("rows");
    assert_eq!(columns.len(), 3);
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row.as_array().expect("row").len(), columns.len());
    }
}

#[test]
fn csv_artifact_embeds_full_config() {
    let ws = Workspace::new();
    let model = ws.file("gauss.json", GAUSS_MODEL);
    let out = run(&[
        "quantiles",
        "--model",
        &model_arg(&model),
        "--alpha",
        "0.9",
        "--resum",
        "borel:32",
        "--order",
        "1",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let (comments, _, _) = parse_csv(&stdout_of(&out));
    for needle in [
        "command: \"quantiles\"",
        "resum: \"borel:32\"",
        "order: 1",
        "alpha: [0.9]",
        "t: 1.0",
    ] {
        assert!(
            comments.iter().any(|c| c == needle),
            "missing config line '{needle}' in {comments:?}"
        );
    }
}
