//! Batch front end for the expansion library.
//!
//! One invocation runs one command against one JSON model file and writes
//! one artifact (CSV or JSON) to stdout or `--out`. Artifacts are
//! self-describing: every report embeds the fully resolved configuration,
//! including the model itself, so a report can be reproduced from its own
//! header. Nothing here mutates its inputs, and fixed-seed runs are
//! byte-identical.
//!
//! Exit codes: 0 when all requested outputs were written, 1 for runtime
//! failures (poles, overflow, quadrature breakdown, ...), 2 for usage
//! errors. Failures print one machine-readable line on stderr:
//! `error[<category>]: <message>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use levygraph::model::JumpDiffusionFile;
use levygraph::series::{ln_trunc, Poly};
use levygraph::{
    borel_resum, default_window, density_polynomials, empirical_quantile, eval_pade,
    gaussian_baseline, gaussian_quantile, large_diffusion_series, levy_to_symbol, log_phi_series,
    model_quantile, normalize_density, pade_from_coeffs, phi_series, phi_series_1d,
    predicted_quantile, simulate, BetaSeries, BorelSpec, EvalError, EvalPoint, JumpDiffusionModel,
    McError, Model, ModelError, ModelFile, Potential, ResumError, SeriesKind, SeriesOptions,
    DEFAULT_MAX_ORDER, DEFAULT_NORM_TOL, PROTOCOL_SEED,
};
use serde::Serialize;

/// All commands evaluate at unit time; time dependence enters through the
/// model's coefficients, so a rescaled model covers other horizons.
const CLI_TIME: f64 = 1.0;

/// Largest accepted `--order`; matches the library's default census cap.
const ORDER_CAP: usize = DEFAULT_MAX_ORDER;

/// Largest accepted grid, as a guard against typo'd step sizes.
const MAX_GRID_POINTS: usize = 1_000_000;

/// Smallest sample size for which the quantile comparison is meaningful.
const MIN_COMPARE_SAMPLES: usize = 1_000;

/// Environment variable that overrides `--seed` when set.
const SEED_ENV: &str = "LEVYGRAPH_SEED";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Bad flags or an unusable model file; exit code 2, nothing was run.
    Usage(String),
    /// The run started but could not produce the requested output; exit 1.
    Runtime {
        category: &'static str,
        message: String,
    },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(category: &'static str, err: impl std::fmt::Display) -> CliError {
    CliError::Runtime {
        category,
        message: err.to_string(),
    }
}

fn resum_category(err: &ResumError) -> &'static str {
    match err {
        ResumError::PoleOnPath { .. } => "pole-on-path",
        ResumError::SingularSystem { .. } => "singular-system",
        ResumError::ZeroDenominatorH1 => "zero-denominator",
        ResumError::NotEnoughCoefficients { .. } => "order-too-low",
        ResumError::InvalidNodeCount(_) | ResumError::NodeNotConverged(_) => "quadrature",
        ResumError::LogSeriesNotEnabled => "resummation",
        ResumError::InvalidBeta(_) => "invalid-parameter",
        ResumError::NotOneDimensional(_) => "dimension",
        ResumError::NonFiniteResult => "non-finite",
        ResumError::Model(_) => "model",
    }
}

fn resum_err(err: ResumError) -> CliError {
    runtime(resum_category(&err), err)
}

fn mc_err(err: McError) -> CliError {
    let category = match &err {
        McError::EmptySample | McError::InvalidAlpha(_) | McError::InvalidModel(_) => {
            "invalid-parameter"
        }
        McError::NoBins | McError::BadWindow => "integration",
        McError::NonFiniteDensity { .. } => "non-finite",
        McError::ToleranceNotReached => "quadrature",
        McError::Resum(inner) => resum_category(inner),
        McError::Model(_) => "model",
    };
    runtime(category, err)
}

fn eval_err(err: EvalError) -> CliError {
    runtime("evaluation", err)
}

fn model_err(err: ModelError) -> CliError {
    runtime("model", err)
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

/// Series expansion, resummed densities, and simulation cross-checks for
/// jump-diffusion models confined by a polynomial potential.
#[derive(Parser, Debug)]
#[command(name = "levygraph", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print expansion coefficients h_0..h_N over a grid of field values.
    Expand(ExpandArgs),
    /// Tabulate log-density and normalized density over a grid.
    Density(CommonArgs),
    /// Predicted and Gaussian-baseline quantiles for the requested levels.
    Quantiles(CommonArgs),
    /// Draw samples from the model and export them, one value per row.
    Simulate(CommonArgs),
    /// Compare empirical quantiles against predicted and Gaussian ones.
    Compare(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Model description file (JSON).
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    /// Expansion order N (highest retained power of the coupling).
    #[arg(long, value_name = "N", default_value_t = 2)]
    order: usize,

    /// Resummation method: partial | pade:M/N | borel:K.
    #[arg(long, value_name = "METHOD", default_value = "pade:1/1")]
    resum: String,

    /// Evaluation grid lo:hi:step (inclusive of both ends).
    #[arg(long, value_name = "LO:HI:STEP", allow_hyphen_values = true)]
    grid: Option<String>,

    /// Comma-separated quantile levels, each strictly between 0 and 1.
    #[arg(long, value_name = "A1,A2,...")]
    alpha: Option<String>,

    /// Sample count for simulation-backed commands.
    #[arg(long, value_name = "SAMPLES")]
    n: Option<usize>,

    /// RNG seed; the LEVYGRAPH_SEED environment variable overrides it.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Write the artifact here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Artifact format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Expand the log-density (connected graphs only) instead of the
    /// density itself.
    #[arg(long)]
    log: bool,

    /// Use the large-diffusion normal form: jump cumulants against a
    /// quadratic confinement, with the diffusion strength as the
    /// expansion parameter.
    #[arg(long)]
    large_diffusion: bool,

    /// Use the one-dimensional partition fast path (raw series only).
    #[arg(long)]
    d1_fast: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

// ---------------------------------------------------------------------------
// Flag parsing helpers
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ResumMethod {
    Partial,
    Pade(usize, usize),
    Borel(usize),
}

impl ResumMethod {
    fn parse(text: &str) -> Result<Self, CliError> {
        let bad = || {
            usage(format!(
                "unrecognized --resum '{text}'; expected partial, pade:M/N, or borel:K"
            ))
        };
        if text == "partial" || text == "partial_sum" {
            return Ok(Self::Partial);
        }
        if let Some(rest) = text.strip_prefix("pade:") {
            let (m, n) = rest.split_once('/').ok_or_else(bad)?;
            let m: usize = m.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            return Ok(Self::Pade(m, n));
        }
        if let Some(rest) = text.strip_prefix("borel:") {
            let k: usize = rest.parse().map_err(|_| bad())?;
            if k < 2 {
                return Err(usage(format!(
                    "borel quadrature needs at least 2 nodes, got {k}"
                )));
            }
            return Ok(Self::Borel(k));
        }
        Err(bad())
    }

    fn canonical(&self) -> String {
        match self {
            Self::Partial => "partial".to_string(),
            Self::Pade(m, n) => format!("pade:{m}/{n}"),
            Self::Borel(k) => format!("borel:{k}"),
        }
    }

    /// A Padé quotient needs coefficients through order M+N.
    fn check_order(&self, order: usize) -> Result<(), CliError> {
        if let Self::Pade(m, n) = self {
            if m + n > order {
                return Err(usage(format!(
                    "pade:{m}/{n} needs series order at least {}, got --order {order}",
                    m + n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Grid {
    spec: String,
    points: Vec<f64>,
}

fn parse_grid(text: &str) -> Result<Grid, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(usage(format!(
            "unrecognized --grid '{text}'; expected lo:hi:step"
        )));
    };
    let parse = |s: &str, what: &str| -> Result<f64, CliError> {
        s.parse::<f64>()
            .map_err(|_| usage(format!("grid {what} '{s}' is not a number")))
    };
    let lo = parse(lo, "lower bound")?;
    let hi = parse(hi, "upper bound")?;
    let step = parse(step, "step")?;
    if !lo.is_finite() || !hi.is_finite() || !step.is_finite() || step <= 0.0 {
        return Err(usage(format!(
            "grid '{text}' needs finite bounds and a positive step"
        )));
    }
    if hi < lo {
        return Err(usage(format!(
            "grid '{text}' is empty: upper bound is below lower bound"
        )));
    }
    // Tolerate one part in 1e9 of rounding so lo:hi:step with an exact
    // integer count includes the upper bound.
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(usage(format!(
            "grid '{text}' has {count} points; the cap is {MAX_GRID_POINTS}"
        )));
    }
    let points = (0..count).map(|i| lo + step * i as f64).collect();
    Ok(Grid {
        spec: text.to_string(),
        points,
    })
}

fn parse_alphas(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        let a: f64 = piece
            .parse()
            .map_err(|_| usage(format!("quantile level '{piece}' is not a number")))?;
        if !(a > 0.0 && a < 1.0) {
            return Err(usage(format!(
                "quantile level {a} must lie strictly between 0 and 1"
            )));
        }
        out.push(a);
    }
    if out.is_empty() {
        return Err(usage("--alpha needs at least one level"));
    }
    Ok(out)
}

/// LEVYGRAPH_SEED beats --seed beats the shipped protocol seed.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text.parse().map_err(|_| {
            usage(format!(
                "{SEED_ENV}='{text}' is not an unsigned 64-bit integer"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(flag.unwrap_or(PROTOCOL_SEED)),
        Err(e) => Err(usage(format!("{SEED_ENV} is not valid unicode: {e}"))),
    }
}

fn check_order_cap(order: usize) -> Result<(), CliError> {
    if order > ORDER_CAP {
        return Err(usage(format!(
            "--order {order} exceeds the cap of {ORDER_CAP}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Model loading
// ---------------------------------------------------------------------------

struct LoadedModel {
    model: Model,
    path: String,
}

fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read model file '{}': {e}", path.display())))?;
    let file = ModelFile::from_json_str(&text)
        .map_err(|e| usage(format!("model file '{}': {e}", path.display())))?;
    let model = file
        .resolve()
        .map_err(|e| usage(format!("model file '{}': {e}", path.display())))?;
    Ok(LoadedModel {
        model,
        path: path.display().to_string(),
    })
}

fn jump_diffusion_model(file: &JumpDiffusionFile) -> Result<JumpDiffusionModel, CliError> {
    JumpDiffusionModel::new(
        file.a.unwrap_or(0.0),
        file.beta,
        file.z1,
        file.z2,
        file.s1,
        file.s2,
    )
    .map_err(|e| usage(format!("jump-diffusion section: {e}")))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Every artifact embeds this block verbatim, so outputs are
/// self-describing and reruns can be checked field by field.
#[derive(Serialize)]
struct ResolvedConfig {
    command: &'static str,
    model_path: String,
    model: ModelFile,
    t: f64,
    order: Option<usize>,
    resum: Option<String>,
    mode: Option<String>,
    grid: Option<String>,
    alpha: Option<Vec<f64>>,
    n: Option<usize>,
    seed: Option<u64>,
}

impl ResolvedConfig {
    fn new(command: &'static str, loaded: &LoadedModel) -> Self {
        Self {
            command,
            model_path: loaded.path.clone(),
            model: loaded.model.source.clone(),
            t: CLI_TIME,
            order: None,
            resum: None,
            mode: None,
            grid: None,
            alpha: None,
            n: None,
            seed: None,
        }
    }
}

struct Report {
    config: ResolvedConfig,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn columns_of(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Shortest round-trip decimal form; stable across reruns by construction.
fn format_float(v: f64) -> String {
    format!("{v}")
}

impl Report {
    fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                #[derive(Serialize)]
                struct JsonReport<'a> {
                    config: &'a ResolvedConfig,
                    columns: &'a [String],
                    rows: &'a [Vec<f64>],
                }
                let body = JsonReport {
                    config: &self.config,
                    columns: &self.columns,
                    rows: &self.rows,
                };
                serde_json::to_string_pretty(&body)
                    .map(|mut s| {
                        s.push('\n');
                        s
                    })
                    .map_err(|e| runtime("serialization", e))
            }
            Format::Csv => {
                let value =
                    serde_json::to_value(&self.config).map_err(|e| runtime("serialization", e))?;
                let mut out = String::new();
                if let serde_json::Value::Object(map) = value {
                    for (key, val) in map {
                        // Compact JSON per line keeps the header both
                        // grep-friendly and machine-parseable.
                        let _ = writeln!(out, "# {key}: {val}");
                    }
                }
                let _ = writeln!(out, "{}", self.columns.join(","));
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
                    let _ = writeln!(out, "{}", line.join(","));
                }
                Ok(out)
            }
        }
    }

    fn emit(&self, format: Format, out: &Option<PathBuf>) -> Result<(), CliError> {
        let text = self.render(format)?;
        match out {
            Some(path) => fs::write(path, text).map_err(|e| {
                runtime("io", format!("cannot write '{}': {e}", path.display()))
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Log-density engine for jump-diffusion models
// ---------------------------------------------------------------------------

/// Evaluates the model's predicted log-density at any point, with the
/// resummation method applied to the connected (log) series.
///
/// The expansion runs in the centered variable `psi = mean - x`; the
/// reflection is the orientation under which the odd-moment term steepens
/// the lower flank and fattens the upper one, matching simulation.
struct DensityEngine {
    model: JumpDiffusionModel,
    order: usize,
    method: ResumMethod,
    /// Raw-series coefficients as polynomials in psi; `None` for pure
    /// diffusion, where the log-series is exactly `-psi^2 * beta`.
    polys: Option<Vec<Poly>>,
}

impl DensityEngine {
    fn new(
        model: JumpDiffusionModel,
        order: usize,
        method: ResumMethod,
    ) -> Result<Self, CliError> {
        method.check_order(order)?;
        let polys = if model.activity() > 0.0 {
            let spec = model
                .centered_jump_spec_to(2 * order.max(1))
                .map_err(mc_err)?;
            let jump = spec.without_diffusion();
            let sym = levy_to_symbol(&jump, 2 * order.max(1)).map_err(model_err)?;
            let pot = Potential::isotropic_quadratic(1);
            Some(density_polynomials(&sym, &pot, CLI_TIME, order).map_err(eval_err)?)
        } else {
            None
        };
        Ok(Self {
            model,
            order,
            method,
            polys,
        })
    }

    fn log_coeffs(&self, psi: f64) -> Vec<f64> {
        match &self.polys {
            Some(polys) => {
                let raw: Vec<f64> = polys.iter().map(|p| p.eval(psi)).collect();
                ln_trunc(&raw, self.order)
            }
            None => {
                let mut g = vec![0.0; self.order + 1];
                if self.order >= 1 {
                    g[1] = -psi * psi;
                }
                g
            }
        }
    }

    fn log_density(&self, x: f64) -> Result<f64, CliError> {
        let psi = self.model.mean() - x;
        match &self.polys {
            // Pure diffusion: the log series terminates at first order, so
            // partial sums, Padé quotients, and Borel quadrature all equal
            // the exact Gaussian log-density. Evaluating it directly also
            // avoids a spuriously singular Padé system when psi is tiny.
            None => Ok(if self.order == 0 {
                0.0
            } else {
                -self.model.beta * psi * psi
            }),
            Some(_) => {
                let coeffs = self.log_coeffs(psi);
                eval_log_series(&coeffs, psi, self.model.beta, self.method)
            }
        }
    }

    /// Closure view for the quadrature helpers, which expect a plain
    /// function; evaluation errors surface as NaN and are reported by the
    /// integrator as non-finite-density failures.
    fn as_fn(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| self.log_density(x).unwrap_or(f64::NAN)
    }
}

fn eval_log_series(
    coeffs: &[f64],
    psi: f64,
    beta: f64,
    method: ResumMethod,
) -> Result<f64, CliError> {
    // An identically-zero series (pure diffusion at its peak) is its own
    // resummation; the Padé solver would see a singular system there.
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    match method {
        ResumMethod::Partial => {
            let mut acc = 0.0;
            for &c in coeffs.iter().rev() {
                acc = acc * beta + c;
            }
            Ok(acc)
        }
        ResumMethod::Pade(m, n) => {
            let p = pade_from_coeffs(coeffs, m, n).map_err(resum_err)?;
            eval_pade(&p, beta).map_err(resum_err)
        }
        ResumMethod::Borel(k) => {
            let series = BetaSeries {
                kind: SeriesKind::LargeDiffusionLog,
                t: CLI_TIME,
                phi: vec![psi],
                coeffs: coeffs.to_vec(),
            };
            let spec = BorelSpec {
                node_count: k,
                allow_log: true,
            };
            borel_resum(&series, beta, &spec).map_err(resum_err)
        }
    }
}

/// Builds the engine plus the integration window shared by the density
/// and quantile commands.
fn engine_with_window(
    loaded: &LoadedModel,
    order: usize,
    method: ResumMethod,
) -> Result<(DensityEngine, (f64, f64)), CliError> {
    let jd = loaded
        .model
        .require_jump_diffusion()
        .map_err(|e| usage(e.to_string()))?;
    let model = jump_diffusion_model(jd)?;
    let engine = DensityEngine::new(model, order, method)?;
    let window = default_window(&engine.model).map_err(mc_err)?;
    Ok((engine, window))
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_expand(args: &ExpandArgs) -> Result<(), CliError> {
    let common = &args.common;
    check_order_cap(common.order)?;
    if args.d1_fast && args.log {
        return Err(usage(
            "--d1-fast computes the raw series; drop --log or --d1-fast",
        ));
    }
    let loaded = load_model(&common.model)?;
    let grid = match &common.grid {
        Some(g) => parse_grid(g)?,
        None => return Err(usage("expand needs --grid")),
    };

    let order = common.order;
    // A model carrying only a jump-diffusion section has no potential to
    // expand against; its natural series is the normal-form one, so route
    // it there without requiring the flag.
    let large_diffusion = args.large_diffusion
        || (loaded.model.potential.is_none() && loaded.model.jump_diffusion.is_some());
    let mode = match (large_diffusion, args.log) {
        (true, true) => "large-diffusion-log",
        (true, false) => "large-diffusion",
        (false, true) => "log",
        (false, false) => "raw",
    };

    let series_at: Box<dyn Fn(f64) -> Result<BetaSeries, CliError>> = if large_diffusion {
        // Jump cumulants against a quadratic confinement. The driving
        // process comes either from an explicit `levy` section (which must
        // carry diffusion, since its strength sets the expansion parameter)
        // or from a `jump_diffusion` section via the centered normal form.
        let spec = if loaded.model.levy.is_some() {
            loaded.model.require_levy().map_err(|e| usage(e.to_string()))?.clone()
        } else {
            let jd = loaded
                .model
                .require_jump_diffusion()
                .map_err(|e| usage(e.to_string()))?;
            jump_diffusion_model(jd)?
                .centered_jump_spec_to(2 * order.max(1))
                .map_err(|e| usage(e.to_string()))?
        };
        if spec.dim != 1 {
            return Err(usage(format!(
                "expand grids are scalar; the model has dimension {}",
                spec.dim
            )));
        }
        if args.d1_fast {
            let jump = spec.without_diffusion();
            let sym = levy_to_symbol(&jump, 2 * order.max(1)).map_err(model_err)?;
            let pot = Potential::isotropic_quadratic(1);
            Box::new(move |phi: f64| {
                let point = EvalPoint::new(CLI_TIME, vec![phi]).map_err(model_err)?;
                let series = phi_series_1d(&sym, &pot, &point, order).map_err(eval_err)?;
                Ok(BetaSeries {
                    kind: SeriesKind::LargeDiffusion,
                    ..series
                })
            })
        } else {
            let log = args.log;
            Box::new(move |phi: f64| {
                let point = EvalPoint::new(CLI_TIME, vec![phi]).map_err(model_err)?;
                large_diffusion_series(&spec, &point, order, log).map_err(eval_err)
            })
        }
    } else {
        if loaded.model.dim != 1 {
            return Err(usage(format!(
                "expand grids are scalar; the model has dimension {}",
                loaded.model.dim
            )));
        }
        let pot = loaded
            .model
            .require_potential()
            .map_err(|e| usage(e.to_string()))?
            .clone();
        let max_legs = order * pot.max_degree();
        let sym = loaded
            .model
            .symbol_at_order(max_legs.max(1))
            .map_err(|e| usage(e.to_string()))?;
        let log = args.log;
        let fast = args.d1_fast;
        Box::new(move |phi: f64| {
            let point = EvalPoint::new(CLI_TIME, vec![phi]).map_err(model_err)?;
            if fast {
                phi_series_1d(&sym, &pot, &point, order).map_err(eval_err)
            } else if log {
                log_phi_series(&sym, &pot, &point, order, &SeriesOptions::default())
                    .map_err(eval_err)
            } else {
                phi_series(&sym, &pot, &point, order, &SeriesOptions::default()).map_err(eval_err)
            }
        })
    };

    let mut rows = Vec::with_capacity(grid.points.len());
    for &phi in &grid.points {
        let series = series_at(phi)?;
        let mut row = Vec::with_capacity(order + 2);
        row.push(phi);
        row.extend_from_slice(&series.coeffs);
        rows.push(row);
    }

    // Raw-kind coefficients are written h0..hN, log-kind g0..gN.
    let prefix = if args.log { "g" } else { "h" };
    let mut columns = vec!["phi".to_string()];
    columns.extend((0..=order).map(|k| format!("{prefix}{k}")));

    let mut config = ResolvedConfig::new("expand", &loaded);
    config.order = Some(order);
    config.mode = Some(mode.to_string());
    config.grid = Some(grid.spec.clone());
    let report = Report {
        config,
        columns,
        rows,
    };
    report.emit(common.format, &common.out)
}

fn cmd_density(common: &CommonArgs) -> Result<(), CliError> {
    check_order_cap(common.order)?;
    let method = ResumMethod::parse(&common.resum)?;
    let loaded = load_model(&common.model)?;
    let grid = match &common.grid {
        Some(g) => parse_grid(g)?,
        None => return Err(usage("density needs --grid")),
    };
    let (engine, window) = engine_with_window(&loaded, common.order, method)?;

    // Grid points first: a typed failure here carries its exact category
    // (pole-on-path, zero-denominator, ...) before any quadrature runs.
    let mut log_densities = Vec::with_capacity(grid.points.len());
    for &x in &grid.points {
        log_densities.push(engine.log_density(x)?);
    }
    let ld = engine.as_fn();
    let z = normalize_density(&ld, window, DEFAULT_NORM_TOL).map_err(mc_err)?;

    let rows = grid
        .points
        .iter()
        .zip(&log_densities)
        .map(|(&x, &l)| vec![x, l, l.exp() / z])
        .collect();

    let mut config = ResolvedConfig::new("density", &loaded);
    config.order = Some(common.order);
    config.resum = Some(method.canonical());
    config.grid = Some(grid.spec.clone());
    let report = Report {
        config,
        columns: columns_of(&["phi", "log_density", "density"]),
        rows,
    };
    report.emit(common.format, &common.out)
}

fn cmd_quantiles(common: &CommonArgs) -> Result<(), CliError> {
    check_order_cap(common.order)?;
    let method = ResumMethod::parse(&common.resum)?;
    let loaded = load_model(&common.model)?;
    let alphas = match &common.alpha {
        Some(a) => parse_alphas(a)?,
        None => vec![0.5, 0.9, 0.99],
    };
    let (engine, window) = engine_with_window(&loaded, common.order, method)?;
    let (mean, variance) = gaussian_baseline(&engine.model);

    let ld = engine.as_fn();
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let predicted = model_quantile(&ld, window, alpha, DEFAULT_NORM_TOL).map_err(mc_err)?;
        let gaussian = gaussian_quantile(mean, variance, alpha).map_err(mc_err)?;
        rows.push(vec![alpha, predicted, gaussian]);
    }

    let mut config = ResolvedConfig::new("quantiles", &loaded);
    config.order = Some(common.order);
    config.resum = Some(method.canonical());
    config.alpha = Some(alphas.clone());
    let report = Report {
        config,
        columns: columns_of(&["alpha", "predicted", "gaussian"]),
        rows,
    };
    report.emit(common.format, &common.out)
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), CliError> {
    let loaded = load_model(&common.model)?;
    let jd = loaded
        .model
        .require_jump_diffusion()
        .map_err(|e| usage(e.to_string()))?;
    let model = jump_diffusion_model(jd)?;
    let n = common.n.unwrap_or(100_000);
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let seed = resolve_seed(common.seed)?;
    let sample = simulate(&model, n, seed).map_err(mc_err)?;

    let rows = sample.values.iter().map(|&v| vec![v]).collect();
    let mut config = ResolvedConfig::new("simulate", &loaded);
    config.n = Some(n);
    config.seed = Some(seed);
    let report = Report {
        config,
        columns: columns_of(&["value"]),
        rows,
    };
    report.emit(common.format, &common.out)
}

fn cmd_compare(common: &CommonArgs) -> Result<(), CliError> {
    let loaded = load_model(&common.model)?;
    let jd = loaded
        .model
        .require_jump_diffusion()
        .map_err(|e| usage(e.to_string()))?;
    let model = jump_diffusion_model(jd)?;
    let n = common.n.unwrap_or(100_000);
    if n < MIN_COMPARE_SAMPLES {
        return Err(usage(format!(
            "--n {n} is below the comparison minimum of {MIN_COMPARE_SAMPLES}"
        )));
    }
    let alphas = match &common.alpha {
        Some(a) => parse_alphas(a)?,
        None => vec![0.99],
    };
    let seed = resolve_seed(common.seed)?;

    let sample = simulate(&model, n, seed).map_err(mc_err)?;
    let (mean, variance) = gaussian_baseline(&model);
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let empirical = empirical_quantile(&sample, alpha).map_err(mc_err)?;
        // The comparison pins the second-order [1/1] prediction — the
        // headline estimator — regardless of --resum.
        let predicted = predicted_quantile(&model, alpha).map_err(mc_err)?;
        let gaussian = gaussian_quantile(mean, variance, alpha).map_err(mc_err)?;
        rows.push(vec![
            alpha,
            empirical,
            predicted,
            gaussian,
            (predicted - empirical).abs(),
            (gaussian - empirical).abs(),
        ]);
    }

    let mut config = ResolvedConfig::new("compare", &loaded);
    config.order = Some(2);
    config.resum = Some("pade:1/1".to_string());
    config.alpha = Some(alphas.clone());
    config.n = Some(n);
    config.seed = Some(seed);
    let report = Report {
        config,
        columns: columns_of(&[
            "alpha",
            "empirical",
            "predicted",
            "gaussian",
            "predicted_abs_err",
            "gaussian_abs_err",
        ]),
        rows,
    };
    report.emit(common.format, &common.out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Expand(args) => cmd_expand(args),
        Command::Density(common) => cmd_density(common),
        Command::Quantiles(common) => cmd_quantiles(common),
        Command::Simulate(common) => cmd_simulate(common),
        Command::Compare(common) => cmd_compare(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; real parse errors
            // are usage errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error[usage]: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime { category, message }) => {
            eprintln!("error[{category}]: {message}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
