//! Command-line front end: `formfactor`, `curve`, `critical`, `invert` and
//! `simulate`.
//!
//! Tables are written as long-format CSV with `#` metadata lines (schema
//! version, parameters) or as JSON. Errors print one line of the form
//! `error[<code>] <message>` and exit with
//!
//! | exit | code                                                 |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 1    | `io`                                                 |
//! | 2    | `usage`, `domain`, `unsupported`, `no_critical_point` |
//! | 3    | `convergence`, `iteration`, `solver`, `linear_solve`, `calibration` |
//! | 4    | `statistical` (`simulate --compare` with `|z| ≥` threshold) |

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::critical::{eta_critical, FminInverter};
use crate::enhancement::{
    approx_large_kappa, enhancement_exact, enhancement_gue, series_is_meaningful, series_small_kappa, Method,
};
use crate::error::Error;
use crate::formfactor::{b2_transient, Chaoticity, ScaledTime};
use crate::numerics::QuadratureConfig;
use crate::rmtsim::{
    calibrate_kappa, delay_stats_from_records, enhancement_from_records, mean_s_from_records, simulate,
    CalibrationConfig, DelayTimeStats, EnhancementEstimate, Ensemble, MeanSEstimate, RealizationRecord,
    ScatteringModel,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "elastic-enhancement",
    version,
    about = "Elastic enhancement factor F(eta|kappa) across the regular-to-chaotic transition"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub abs_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (rayon default when absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// `key = value` file; keys are long flag names, flags given on the
    /// command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate B2(s|kappa) on a uniform s grid.
    Formfactor(FormfactorArgs),
    /// Enhancement curves F(eta|kappa) with approximations and the tangent 2 - eta/2.
    Curve(CurveArgs),
    /// Critical openness eta_c and F_min for a list of kappa values.
    Critical(CriticalArgs),
    /// Recover kappa from an observed F_min.
    Invert(InvertArgs),
    /// Monte Carlo estimate of F, mean S, transmission and delay-time statistics.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FormfactorArgs {
    #[arg(long, default_value = "5")]
    pub kappa: Chaoticity,
    #[arg(long, default_value_t = 0.0)]
    pub s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveMethod {
    Exact,
    Series,
    LargeKappa,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Comma-separated chaoticities; `inf` selects the GUE limit.
    #[arg(long, value_delimiter = ',', default_value = "0.5,5,50")]
    pub kappa: Vec<Chaoticity>,
    #[arg(long, default_value_t = 0.0)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 12.0)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 241)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = CurveMethod::All)]
    pub method: CurveMethod,
}

#[derive(Debug, Clone, Args)]
pub struct CriticalArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,5,50")]
    pub kappa: Vec<Chaoticity>,
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    /// Observed minimum of the enhancement factor, strictly inside (1, 2).
    #[arg(long, allow_negative_numbers = true)]
    pub f_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Poisson,
    Gue,
    Transition,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = EnsembleArg::Gue)]
    pub ensemble: EnsembleArg,
    /// Transition strength (transition ensemble only).
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub levels: usize,
    #[arg(long, default_value_t = 20)]
    pub channels: usize,
    /// Openness `eta = 4Mx`.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 2000)]
    pub realizations: usize,
    /// Compare F with the analytic value and fail (exit 4) when `|z|` reaches the threshold.
    #[arg(long)]
    pub compare: bool,
    /// Chaoticity of the analytic reference for the transition ensemble
    /// (calibrated from the form factor when absent).
    #[arg(long)]
    pub kappa: Option<Chaoticity>,
    #[arg(long, default_value_t = 3.0)]
    pub z_threshold: f64,
    /// Per-realization CSV records.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Usage,
    Domain,
    Unsupported,
    NoCriticalPoint,
    Convergence,
    Iteration,
    Solver,
    LinearSolve,
    Calibration,
    Statistical,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Io => "io",
            ErrorKind::Usage => "usage",
            ErrorKind::Domain => "domain",
            ErrorKind::Unsupported => "unsupported",
            ErrorKind::NoCriticalPoint => "no_critical_point",
            ErrorKind::Convergence => "convergence",
            ErrorKind::Iteration => "iteration",
            ErrorKind::Solver => "solver",
            ErrorKind::LinearSolve => "linear_solve",
            ErrorKind::Calibration => "calibration",
            ErrorKind::Statistical => "statistical",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Usage | ErrorKind::Domain | ErrorKind::Unsupported | ErrorKind::NoCriticalPoint => 2,
            ErrorKind::Convergence
            | ErrorKind::Iteration
            | ErrorKind::Solver
            | ErrorKind::LinearSolve
            | ErrorKind::Calibration => 3,
            ErrorKind::Statistical => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    /// `error[<code>] <message>` on a single line.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}] {}", self.kind.code(), flat.join(" "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Domain(_) => ErrorKind::Domain,
            Error::Unsupported(_) => ErrorKind::Unsupported,
            Error::NoCriticalPoint(_) => ErrorKind::NoCriticalPoint,
            Error::Convergence { .. } => ErrorKind::Convergence,
            Error::Iteration(_) => ErrorKind::Iteration,
            Error::Solver(_) => ErrorKind::Solver,
            Error::LinearSolve(_) => ErrorKind::LinearSolve,
            Error::Calibration(_) => ErrorKind::Calibration,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), applies the config file, runs the
/// command and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let parsed = with_config(args).and_then(|a| match Cli::try_parse_from(a) {
        Ok(cli) => Ok(Ok(cli)),
        Err(e) if !e.use_stderr() => Ok(Err(e)),
        Err(e) => Err(CliError::new(ErrorKind::Usage, e.to_string())),
    });
    let cli = match parsed {
        Ok(Ok(cli)) => cli,
        Ok(Err(info)) => {
            print!("{info}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", e.line());
            return e.kind.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.kind.exit_code()
        }
    }
}

/// Appends `--key=value` for every config entry whose flag is absent from `args`.
fn with_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = flag_value(&args, "config") else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::new(ErrorKind::Io, format!("config file {path}: {e}")))?;
    let command = Cli::command();
    let sub = args
        .iter()
        .skip(1)
        .find_map(|a| command.find_subcommand(a).cloned());
    let given: BTreeSet<String> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_owned())
        .collect();

    let mut merged = args;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::new(
                ErrorKind::Usage,
                format!("{path}:{}: expected key = value", lineno + 1),
            )
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" || given.contains(&key) {
            continue;
        }
        let arg = command
            .get_arguments()
            .chain(sub.iter().flat_map(|s| s.get_arguments()))
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                CliError::new(
                    ErrorKind::Usage,
                    format!("{path}:{}: unknown key '{key}'", lineno + 1),
                )
            })?;
        if arg.get_action().takes_values() {
            merged.push(format!("--{key}={value}"));
        } else if value.parse::<bool>().map_err(|_| {
            CliError::new(
                ErrorKind::Usage,
                format!("{path}:{}: '{key}' expects true or false", lineno + 1),
            )
        })? {
            merged.push(format!("--{key}"));
        }
    }
    Ok(merged)
}

fn flag_value(args: &[String], name: &str) -> Option<String> {
    let long = format!("--{name}");
    let prefix = format!("--{name}=");
    args.iter().enumerate().find_map(|(i, a)| {
        if a == &long {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix(&prefix).map(str::to_owned)
        }
    })
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = QuadratureConfig {
        abs_tol: cli.common.abs_tol,
        rel_tol: cli.common.rel_tol,
        ..QuadratureConfig::default()
    };
    cfg.validate()?;
    let job = || match &cli.command {
        Command::Formfactor(a) => cmd_formfactor(&cli.common, a, &cfg),
        Command::Curve(a) => cmd_curve(&cli.common, a, &cfg),
        Command::Critical(a) => cmd_critical(&cli.common, a, &cfg),
        Command::Invert(a) => cmd_invert(&cli.common, a, &cfg),
        Command::Simulate(a) => cmd_simulate(&cli.common, a, &cfg),
    };
    match cli.common.threads {
        Some(0) => Err(CliError::new(ErrorKind::Domain, "--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?
            .install(job),
        None => job(),
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::new(ErrorKind::Io, format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn value_text(v: &Value) -> String {
    v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string())
}

#[derive(Serialize)]
struct Document<'a, R> {
    schema_version: u32,
    command: &'a str,
    parameters: serde_json::Map<String, Value>,
    rows: &'a [R],
}

/// Writes `rows` as CSV (with metadata comments) or JSON.
fn emit<R: Serialize>(
    common: &CommonArgs,
    command: &str,
    parameters: &[(&str, Value)],
    rows: &[R],
) -> CliResult<()> {
    let mut out = open_output(common.out.as_deref())?;
    match common.format {
        Format::Csv => {
            writeln!(out, "# elastic-enhancement {command}")?;
            writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
            for (k, v) in parameters {
                writeln!(out, "# {k}={}", value_text(v))?;
            }
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = Document {
                schema_version: SCHEMA_VERSION,
                command,
                parameters: parameters
                    .iter()
                    .map(|(k, v)| ((*k).to_owned(), v.clone()))
                    .collect(),
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn tolerance_parameters(cfg: &QuadratureConfig) -> [(&'static str, Value); 2] {
    [("abs_tol", json!(cfg.abs_tol)), ("rel_tol", json!(cfg.rel_tol))]
}

/// `points` uniform nodes on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 || !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(CliError::new(
            ErrorKind::Domain,
            format!("grid needs >= 2 points and lo < hi, got [{lo}, {hi}] with {points} points"),
        ));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormfactorRow {
    pub s: f64,
    pub b2: f64,
    pub abs_error_estimate: f64,
}

pub fn formfactor_rows(
    kappa: Chaoticity,
    grid: &[f64],
    cfg: &QuadratureConfig,
) -> CliResult<Vec<FormfactorRow>> {
    kappa.validated()?;
    grid.par_iter()
        .map(|&s| {
            let r = b2_transient(ScaledTime::new(s)?, kappa, cfg)?;
            Ok(FormfactorRow {
                s,
                b2: r.value,
                abs_error_estimate: r.error_estimate,
            })
        })
        .collect()
}

fn cmd_formfactor(common: &CommonArgs, a: &FormfactorArgs, cfg: &QuadratureConfig) -> CliResult<()> {
    if a.s_min < 0.0 {
        return Err(CliError::new(ErrorKind::Domain, "s grid must be non-negative"));
    }
    let grid = uniform_grid(a.s_min, a.s_max, a.points)?;
    let rows = formfactor_rows(a.kappa, &grid, cfg)?;
    let mut params = vec![("kappa", json!(a.kappa))];
    params.extend(tolerance_parameters(cfg));
    emit(common, "formfactor", &params, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    /// Empty for the κ-independent tangent rows.
    pub kappa: Option<Chaoticity>,
    pub eta: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub method: &'static str,
    pub error_estimate: f64,
}

/// Method label of the tangent reference rows.
pub const TANGENT: &str = "tangent";

/// Long-format curve table: per κ the exact curve, the order-3 small-κ
/// series where `κ/η ≤ 1/2`, the large-κ approximation for `κ > 0`, then
/// the tangent `2 - η/2`.
pub fn curve_rows(
    kappas: &[Chaoticity],
    grid: &[f64],
    method: CurveMethod,
    cfg: &QuadratureConfig,
) -> CliResult<Vec<CurveRow>> {
    for k in kappas {
        k.validated()?;
    }
    if grid.iter().any(|&e| e < 0.0) {
        return Err(CliError::new(ErrorKind::Domain, "eta grid must be non-negative"));
    }
    let want = |m: CurveMethod| method == CurveMethod::All || method == m;
    let jobs: Vec<(Chaoticity, Method)> = kappas
        .iter()
        .flat_map(|&k| {
            let mut v = Vec::new();
            if want(CurveMethod::Exact) {
                v.push((k, Method::Exact));
            }
            if want(CurveMethod::Series) && !k.is_infinite() {
                v.push((k, Method::SeriesSmallKappa));
            }
            if want(CurveMethod::LargeKappa) && !k.is_regular() {
                v.push((k, Method::ApproxLargeKappa));
            }
            v
        })
        .collect();
    let per_job: Vec<Vec<CurveRow>> = jobs
        .par_iter()
        .map(|&(kappa, m)| -> CliResult<Vec<CurveRow>> {
            let mut rows = Vec::with_capacity(grid.len());
            for &eta in grid {
                let value = match m {
                    Method::Exact => enhancement_exact(eta, kappa, cfg)?,
                    Method::SeriesSmallKappa => {
                        let k = kappa.as_f64();
                        if eta == 0.0 || !series_is_meaningful(eta, k) {
                            continue;
                        }
                        series_small_kappa(eta, k, 3)?
                    }
                    _ => approx_large_kappa(eta, kappa)?,
                };
                rows.push(CurveRow {
                    kappa: Some(kappa),
                    eta,
                    f: value.f,
                    method: m.name(),
                    error_estimate: value.error_estimate,
                });
            }
            Ok(rows)
        })
        .collect::<CliResult<_>>()?;
    let mut rows: Vec<CurveRow> = per_job.into_iter().flatten().collect();
    rows.extend(grid.iter().map(|&eta| CurveRow {
        kappa: None,
        eta,
        f: 2.0 - 0.5 * eta,
        method: TANGENT,
        error_estimate: 0.0,
    }));
    Ok(rows)
}

fn cmd_curve(common: &CommonArgs, a: &CurveArgs, cfg: &QuadratureConfig) -> CliResult<()> {
    let grid = uniform_grid(a.eta_min, a.eta_max, a.points)?;
    let rows = curve_rows(&a.kappa, &grid, a.method, cfg)?;
    let kappas: Vec<String> = a.kappa.iter().map(ToString::to_string).collect();
    let mut params = vec![
        ("kappa", json!(kappas.join(";"))),
        ("eta_min", json!(a.eta_min)),
        ("eta_max", json!(a.eta_max)),
        ("points", json!(a.points)),
        ("series_order", json!(3)),
        (
            "plot",
            json!("one line per (kappa, method); exact solid, series_small_kappa dashed, approx_large_kappa full, tangent gray"),
        ),
    ];
    params.extend(tolerance_parameters(cfg));
    emit(common, "curve", &params, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalRow {
    pub kappa: Chaoticity,
    pub eta_c: f64,
    pub f_min: f64,
    pub status: String,
}

/// One row per κ; failures carry NaN values and the error code as status.
pub fn critical_rows(kappas: &[Chaoticity], cfg: &QuadratureConfig) -> Vec<(CriticalRow, Option<CliError>)> {
    kappas
        .par_iter()
        .map(|&kappa| match eta_critical(kappa, cfg) {
            Ok(cp) => (
                CriticalRow {
                    kappa,
                    eta_c: cp.eta_c,
                    f_min: cp.f_min,
                    status: "ok".into(),
                },
                None,
            ),
            Err(e) => {
                let e = CliError::from(e);
                (
                    CriticalRow {
                        kappa,
                        eta_c: f64::NAN,
                        f_min: f64::NAN,
                        status: e.kind.code().into(),
                    },
                    Some(e),
                )
            }
        })
        .collect()
}

fn cmd_critical(common: &CommonArgs, a: &CriticalArgs, cfg: &QuadratureConfig) -> CliResult<()> {
    let results = critical_rows(&a.kappa, cfg);
    let rows: Vec<CriticalRow> = results.iter().map(|(r, _)| r.clone()).collect();
    emit(common, "critical", &tolerance_parameters(cfg), &rows)?;
    match results.into_iter().find_map(|(_, e)| e) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvertRow {
    pub f_min: f64,
    pub kappa: Chaoticity,
    pub eta_c: f64,
    pub attainable_low: f64,
    pub attainable_high: f64,
}

pub fn invert_row(f_min: f64, cfg: &QuadratureConfig) -> CliResult<InvertRow> {
    if !(f_min > 1.0 && f_min < 2.0) {
        return Err(CliError::new(
            ErrorKind::Domain,
            format!("F_min must lie strictly inside (1, 2), got {f_min}"),
        ));
    }
    let inverter = FminInverter::new(cfg)?;
    let kappa = inverter.invert(f_min)?;
    let (attainable_low, attainable_high) = inverter.attainable_range();
    Ok(InvertRow {
        f_min,
        kappa,
        eta_c: eta_critical(kappa, cfg)?.eta_c,
        attainable_low,
        attainable_high,
    })
}

fn cmd_invert(common: &CommonArgs, a: &InvertArgs, cfg: &QuadratureConfig) -> CliResult<()> {
    let row = invert_row(a.f_min, cfg)?;
    emit(common, "invert", &tolerance_parameters(cfg), &[row])
}

/// Analytic reference for `simulate --compare`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference_f: f64,
    pub reference: String,
    pub z_score: f64,
    pub z_threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub model: ScatteringModel,
    pub eta: f64,
    pub x: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub enhancement: EnhancementEstimate,
    pub mean_s: MeanSEstimate,
    /// `(1 - x)/(1 + x)`.
    pub mean_s_weak_coupling: f64,
    pub delay_time: DelayTimeStats,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    quantity: &'static str,
    value: f64,
    std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RecordRow {
    index: u64,
    s_aa_re: f64,
    s_aa_im: f64,
    elastic_power: f64,
    inelastic_power: f64,
    delay_time: f64,
    unitarity_deficit: f64,
}

pub fn simulation_model(a: &SimulateArgs) -> CliResult<ScatteringModel> {
    let ensemble = match a.ensemble {
        EnsembleArg::Poisson => Ensemble::PoissonDiagonal,
        EnsembleArg::Gue => Ensemble::Gue,
        EnsembleArg::Transition => Ensemble::Transition { lambda: a.lambda },
    };
    Ok(ScatteringModel::with_eta(
        a.levels, a.channels, a.eta, a.spacing, ensemble,
    )?)
}

/// Runs the simulation and assembles the report; `records` receives the
/// per-realization data.
pub fn simulation_report(
    a: &SimulateArgs,
    seed: u64,
    cfg: &QuadratureConfig,
) -> CliResult<(SimulationReport, Vec<RealizationRecord>)> {
    let model = simulation_model(a)?;
    if model.n_channels < 2 {
        return Err(CliError::new(
            ErrorKind::Domain,
            "simulate needs at least 2 channels",
        ));
    }
    let records = simulate(&model, a.realizations, seed)?;
    let enhancement = enhancement_from_records(&records, seed)?;
    let comparison = if a.compare {
        let (reference_f, reference) = match model.ensemble {
            Ensemble::Gue => (enhancement_gue(model.eta()), "F(eta|inf)".to_owned()),
            Ensemble::PoissonDiagonal => (2.0, "F(eta|0)".to_owned()),
            Ensemble::Transition { lambda } => {
                let kappa = match a.kappa {
                    Some(k) => k,
                    None => {
                        calibrate_kappa(
                            lambda,
                            &CalibrationConfig {
                                n_levels: model.n_levels,
                                mean_spacing: model.mean_spacing,
                                master_seed: seed,
                                ..CalibrationConfig::default()
                            },
                        )?
                        .kappa
                    }
                };
                (
                    enhancement_exact(model.eta(), kappa, cfg)?.f,
                    format!("F(eta|{kappa})"),
                )
            }
        };
        let z_score = enhancement.f.z_score(reference_f);
        Some(Comparison {
            reference_f,
            reference,
            z_score,
            z_threshold: a.z_threshold,
            passed: z_score.abs() < a.z_threshold,
        })
    } else {
        None
    };
    let report = SimulationReport {
        schema_version: SCHEMA_VERSION,
        eta: model.eta(),
        x: model.x(),
        n_realizations: a.realizations,
        master_seed: seed,
        mean_s: mean_s_from_records(&records, seed)?,
        mean_s_weak_coupling: model.mean_s_weak(),
        delay_time: delay_stats_from_records(&records, &model, seed)?,
        enhancement,
        comparison,
        model,
    };
    Ok((report, records))
}

fn write_records(path: &Path, report: &SimulationReport, records: &[RealizationRecord]) -> CliResult<()> {
    let mut out = open_output(Some(path))?;
    writeln!(out, "# elastic-enhancement simulate records")?;
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "# ensemble={}", report.model.ensemble.name())?;
    writeln!(out, "# seed={}", report.master_seed)?;
    writeln!(
        out,
        "# s_aa_re, s_aa_im: channel average of S^aa for the realization"
    )?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let c = r.channel_mean();
        w.serialize(RecordRow {
            index: r.index,
            s_aa_re: c.re,
            s_aa_im: c.im,
            elastic_power: r.elastic_power,
            inelastic_power: r.inelastic_power,
            delay_time: r.delay_time,
            unitarity_deficit: r.unitarity_deficit,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, a: &SimulateArgs, cfg: &QuadratureConfig) -> CliResult<()> {
    let (report, records) = simulation_report(a, common.seed, cfg)?;
    if let Some(path) = &a.records {
        write_records(path, &report, &records)?;
    }
    match common.format {
        Format::Json => {
            let mut out = open_output(common.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
            out.flush()?;
        }
        Format::Csv => {
            let e = &report.enhancement.f;
            let d = &report.delay_time;
            let mut rows = vec![
                ReportRow {
                    quantity: "F",
                    value: e.value,
                    std_error: e.std_error,
                },
                ReportRow {
                    quantity: "S_aa_re",
                    value: report.mean_s.s_aa_re.value,
                    std_error: report.mean_s.s_aa_re.std_error,
                },
                ReportRow {
                    quantity: "S_aa_im",
                    value: report.mean_s.s_aa_im.value,
                    std_error: report.mean_s.s_aa_im.std_error,
                },
                ReportRow {
                    quantity: "T",
                    value: report.mean_s.transmission.value,
                    std_error: report.mean_s.transmission.std_error,
                },
                ReportRow {
                    quantity: "mean_Q",
                    value: d.mean_q.value,
                    std_error: d.mean_q.std_error,
                },
                ReportRow {
                    quantity: "var_Q_normalized",
                    value: d.var_q_normalized.value,
                    std_error: d.var_q_normalized.std_error,
                },
                ReportRow {
                    quantity: "F_from_var_Q",
                    value: d.f_from_var_q.value,
                    std_error: d.f_from_var_q.std_error,
                },
            ];
            if let Some(c) = &report.comparison {
                rows.push(ReportRow {
                    quantity: "F_reference",
                    value: c.reference_f,
                    std_error: 0.0,
                });
                rows.push(ReportRow {
                    quantity: "z_score",
                    value: c.z_score,
                    std_error: 0.0,
                });
            }
            let params = [
                ("ensemble", json!(report.model.ensemble.name())),
                ("levels", json!(report.model.n_levels)),
                ("channels", json!(report.model.n_channels)),
                ("eta", json!(report.eta)),
                ("x", json!(report.x)),
                ("realizations", json!(report.n_realizations)),
                ("seed", json!(report.master_seed)),
            ];
            emit(common, "simulate", &params, &rows)?;
        }
    }
    match &report.comparison {
        Some(c) if !c.passed => Err(CliError::new(
            ErrorKind::Statistical,
            format!(
                "F = {} +/- {} differs from {} = {} by z = {:.3} (threshold {})",
                report.enhancement.f.value,
                report.enhancement.f.std_error,
                c.reference,
                c.reference_f,
                c.z_score,
                c.z_threshold
            ),
        )),
        _ => Ok(()),
    }
}
