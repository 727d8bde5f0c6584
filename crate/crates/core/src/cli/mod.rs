// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! The `udd-echo` command line: `sequence`, `verify`, `scaling` and
//! `spinbath`. Every run writes its outputs plus a manifest into the output
//! directory.
//!
//! Exit codes: 0 success or certified, 1 runtime error, 2 usage error,
//! 3 falsified, 4 inconclusive, 5 resource limit.

pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::fit::geometric_grid;
use crate::propagator::{
    fidelity_scaling, random_dephasing_model, PropagatorError, ScalingOptions, DELTA_NOISE_FLOOR,
};
use crate::sequence::{ExactIntervals, SequenceError, SequenceKind};
use crate::spinbath::{
    build_bath, exact_bath_log_echo, short_time_exponent, BathConfig, ClusterExpansion,
    SpinBathError, MAX_EXACT_NUCLEI,
};
use crate::symbolic::{
    verify_intervals, verify_sequence_float, verify_sequence_rational, Backend, Ring,
    SymbolicError, VerificationReport, VerificationStatus, VerifyOptions, DEFAULT_FLOAT_TOLERANCE,
};

use output::{fmt_f64, OutputDir, RunManifest, OUTPUT_DIR_ENV};

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FALSIFIED: u8 = 3;
pub const EXIT_INCONCLUSIVE: u8 = 4;
pub const EXIT_RESOURCE: u8 = 5;

/// Longest word length the verifier will attempt (`2^(m-1)` odd words).
pub const MAX_VERIFY_ORDER: usize = 40;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Resource(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Io { .. } | CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SymbolicError> for CliError {
    fn from(e: SymbolicError) -> Self {
        match e {
            SymbolicError::WorkerPool(_) => CliError::Resource(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<PropagatorError> for CliError {
    fn from(e: PropagatorError) -> Self {
        match e {
            PropagatorError::BadGrid | PropagatorError::Sequence(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<SpinBathError> for CliError {
    fn from(e: SpinBathError) -> Self {
        match e {
            SpinBathError::TooLarge(_) => CliError::Resource(e.to_string()),
            SpinBathError::InvalidConfig(_) | SpinBathError::Sequence(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Other(e.to_string()),
        }
    }
}

/// Result of a successful run, mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Falsified,
    Inconclusive,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => EXIT_SUCCESS,
            Outcome::Falsified => EXIT_FALSIFIED,
            Outcome::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "udd-echo",
    version,
    about = "Pulse-sequence echo verification and simulation"
)]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = "out")]
    pub output_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a pulse sequence.
    Sequence(SequenceArgs),
    /// Check which time-expansion orders of U+ - U- a sequence cancels.
    Verify(VerifyArgs),
    /// Fit the power law of 1 - v_E on a random dephasing model.
    Scaling(ScalingArgs),
    /// Echo decay of a synthetic nuclear spin bath.
    Spinbath(SpinbathArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KindArgs {
    /// free, hahn, periodic, udd or cdd; a suffix such as `udd3` sets the order.
    #[arg(long)]
    pub kind: String,
    /// Pulse count, or the level for cdd.
    #[arg(long, visible_alias = "level")]
    pub order: Option<usize>,
}

impl KindArgs {
    pub fn resolve(&self) -> Result<SequenceKind, CliError> {
        let name = self.kind.trim().to_ascii_lowercase();
        let kind = if name.chars().any(|c| c.is_ascii_digit()) {
            let kind: SequenceKind = name.parse()?;
            if self.order.is_some_and(|o| o != kind.order()) {
                return Err(CliError::Usage(format!(
                    "--kind {name} conflicts with --order {}",
                    self.order.unwrap_or_default()
                )));
            }
            kind
        } else {
            match name.as_str() {
                "free" | "hahn" => {
                    let kind = SequenceKind::from_parts(&name, 0)?;
                    if self.order.is_some_and(|o| o != kind.order()) {
                        return Err(CliError::Usage(format!(
                            "{name} has order {}",
                            kind.order()
                        )));
                    }
                    kind
                }
                _ => {
                    let order = self.order.ok_or_else(|| {
                        CliError::Usage(format!("--kind {name} requires --order"))
                    })?;
                    SequenceKind::from_parts(&name, order)?
                }
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceFormat {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SequenceArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Total sequence time.
    #[arg(long, default_value_t = 1.0)]
    pub time: f64,
    #[arg(long, value_enum, default_value_t = SequenceFormat::Both)]
    pub format: SequenceFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Longest word length to check; defaults to the order (at least 1).
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    pub backend: BackendArg,
    /// Relative tolerance of the float backend.
    #[arg(long, default_value_t = DEFAULT_FLOAT_TOLERANCE)]
    pub tolerance: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Stop with an inconclusive result after this many seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Also write every odd-weight word coefficient to words.csv.
    #[arg(long)]
    pub words: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub kind: KindArgs,
    /// Hilbert-space dimension of the random model.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Operator norm of X0 and of X1.
    #[arg(long, default_value_t = 1.0)]
    pub bound: f64,
    #[arg(long, default_value_t = 0.01)]
    pub t_min: f64,
    #[arg(long, default_value_t = 0.25)]
    pub t_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Points with 1 - v_E at or below this are excluded from the fit.
    #[arg(long, default_value_t = DELTA_NOISE_FLOOR)]
    pub noise_floor: f64,
    /// Allow t_max (|X0| + |X1|) above the convergence limit.
    #[arg(long)]
    pub no_convergence_check: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpinbathArgs {
    /// Bath configuration (JSON); defaults are used for missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the bath seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sequences, e.g. hahn,udd2,cdd3.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "hahn,udd1,udd2,udd3,udd4"
    )]
    pub sequences: Vec<String>,
    #[arg(long, default_value_t = 0.01)]
    pub t_min: f64,
    #[arg(long, default_value_t = 30.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 121)]
    pub points: usize,
    /// Maximum pair distance (overrides the config and the default tail rule).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Add columns from exact evolution of the whole bath.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Runs one subcommand.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cli.output_dir)?;
    match &cli.command {
        Command::Sequence(a) => cmd_sequence(a, &mut out, start),
        Command::Verify(a) => cmd_verify(a, &mut out, start),
        Command::Scaling(a) => cmd_scaling(a, &mut out, start),
        Command::Spinbath(a) => cmd_spinbath(a, &mut out, start),
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Resource(format!("worker pool: {e}"))),
    }
}

#[derive(Serialize)]
struct Parameters<'a, A: Serialize> {
    output_dir: &'a Path,
    #[serde(flatten)]
    args: &'a A,
}

fn cmd_sequence(
    a: &SequenceArgs,
    out: &mut OutputDir,
    start: Instant,
) -> Result<Outcome, CliError> {
    let kind = a.kind.resolve()?;
    let seq = kind.build(a.time)?;
    let desc = seq.describe();
    if a.format != SequenceFormat::Csv {
        out.write_json("sequence.json", &desc)?;
    }
    if a.format != SequenceFormat::Json {
        let mut t0 = 0.0;
        let n = desc.intervals.len();
        let rows: Vec<Vec<String>> = desc
            .intervals
            .iter()
            .enumerate()
            .map(|(j, &tau)| {
                let row = vec![
                    (j + 1).to_string(),
                    fmt_f64(t0),
                    fmt_f64(tau),
                    (j + 1 < n || desc.trailing_pulse).to_string(),
                ];
                t0 += tau;
                row
            })
            .collect();
        out.write_csv(
            "sequence.csv",
            &["interval", "start", "tau", "pulse_after"],
            &rows,
        )?;
    }
    println!(
        "{kind}: {} intervals, {} pulses{}",
        desc.intervals.len(),
        desc.pulse_count,
        if desc.trailing_pulse {
            " (final pulse at t)"
        } else {
            ""
        }
    );
    let params = Parameters {
        output_dir: out.root(),
        args: a,
    };
    let params = serde_json::to_value(params).map_err(|e| CliError::Other(e.to_string()))?;
    RunManifest::new("sequence", params, vec![]).finish(out, start.elapsed().as_secs_f64())?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    kind: String,
    #[serde(flatten)]
    report: &'a VerificationReport,
}

fn cmd_verify(a: &VerifyArgs, out: &mut OutputDir, start: Instant) -> Result<Outcome, CliError> {
    let kind = a.kind.resolve()?;
    let max_order = a.max_order.unwrap_or(kind.order().max(1));
    if max_order == 0 {
        return Err(CliError::Usage("--max-order must be at least 1".into()));
    }
    if max_order > MAX_VERIFY_ORDER {
        return Err(CliError::Resource(format!(
            "--max-order {max_order} exceeds the supported {MAX_VERIFY_ORDER}"
        )));
    }
    if !(a.tolerance >= 0.0) {
        return Err(CliError::Usage("--tolerance must be non-negative".into()));
    }
    let time_limit = match a.time_limit {
        None => None,
        Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
        Some(s) => {
            return Err(CliError::Usage(format!(
                "--time-limit must be positive, got {s}"
            )))
        }
    };
    if a.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let opts = VerifyOptions {
        workers: a.workers,
        time_limit,
        tolerance: a.tolerance,
        record_words: a.words,
    };
    let report = match a.backend {
        BackendArg::Exact => match kind.exact_intervals()? {
            ExactIntervals::Cyclotomic(v) => {
                verify_intervals(&v, max_order, &opts, Backend::Exact, Ring::Cyclotomic)?
            }
            ExactIntervals::Rational(v) => verify_sequence_rational(&v, max_order, &opts)?,
        },
        BackendArg::Float => verify_sequence_float(kind.build(1.0)?.intervals(), max_order, &opts)?,
    };
    let mut json = serde_json::to_value(VerifySummary {
        kind: kind.to_string(),
        report: &report,
    })
    .map_err(|e| CliError::Other(e.to_string()))?;
    // timing goes to the manifest so the report itself is reproducible
    if let Some(obj) = json.as_object_mut() {
        obj.remove("wall_time_s");
    }
    out.write_json("verify_report.json", &json)?;
    if a.words {
        let rows: Vec<Vec<String>> = report
            .words
            .iter()
            .map(|w| {
                vec![
                    w.word.to_string(),
                    w.order.to_string(),
                    w.is_zero.to_string(),
                    fmt_f64(w.numeric),
                    w.value.join(" "),
                ]
            })
            .collect();
        out.write_csv(
            "words.csv",
            &["word", "order", "is_zero", "numeric", "value"],
            &rows,
        )?;
    }
    let backend = match a.backend {
        BackendArg::Exact => "exact",
        BackendArg::Float => "float",
    };
    let outcome = match &report.status {
        VerificationStatus::Certified => {
            println!(
                "{kind} {backend}: certified through order {}",
                report.max_order_checked
            );
            Outcome::Success
        }
        VerificationStatus::Falsified(w) => {
            println!(
                "{kind} {backend}: falsified at order {} by word {} (coefficient {:.6e})",
                w.order, w.word, w.numeric
            );
            Outcome::Falsified
        }
        VerificationStatus::Inconclusive { reached_order } => {
            println!("{kind} {backend}: inconclusive, certified through order {reached_order} before the time limit");
            Outcome::Inconclusive
        }
    };
    let params = Parameters {
        output_dir: out.root(),
        args: a,
    };
    let mut params = serde_json::to_value(params).map_err(|e| CliError::Other(e.to_string()))?;
    params["max_order"] = max_order.into();
    RunManifest::new("verify", params, vec![]).finish(out, start.elapsed().as_secs_f64())?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ScalingSummary {
    kind: String,
    dim: usize,
    seed: u64,
    slope: f64,
    intercept: f64,
    residual: f64,
    used_points: usize,
    /// `2n + 2` for UDD, where the slope is expected to land.
    expected_slope: Option<usize>,
}

fn cmd_scaling(a: &ScalingArgs, out: &mut OutputDir, start: Instant) -> Result<Outcome, CliError> {
    let kind = a.kind.resolve()?;
    if a.dim == 0 {
        return Err(CliError::Usage("--dim must be at least 1".into()));
    }
    if !(a.bound > 0.0 && a.bound.is_finite()) {
        return Err(CliError::Usage("--bound must be positive".into()));
    }
    let grid = geometric_grid(a.t_min, a.t_max, a.points)
        .ok_or_else(|| CliError::Usage("need 0 < t_min <= t_max and at least one point".into()))?;
    let model = random_dephasing_model(a.dim, a.seed, a.bound)?;
    let opts = ScalingOptions {
        noise_floor: a.noise_floor,
        convergence_limit: if a.no_convergence_check {
            None
        } else {
            ScalingOptions::default().convergence_limit
        },
    };
    let fit = fidelity_scaling(&model, kind, &grid, &opts)?;
    let rows: Vec<Vec<String>> = fit
        .samples
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.v_e),
                fmt_f64(s.deficit),
                s.used.to_string(),
            ]
        })
        .collect();
    out.write_csv("scaling.csv", &["t", "v_e", "one_minus_v_e", "used"], &rows)?;
    let expected = match kind {
        SequenceKind::Udd(n) => Some(2 * n + 2),
        SequenceKind::Free => Some(2),
        SequenceKind::Hahn => Some(4),
        _ => None,
    };
    out.write_json(
        "scaling.json",
        &ScalingSummary {
            kind: kind.to_string(),
            dim: a.dim,
            seed: a.seed,
            slope: fit.slope,
            intercept: fit.intercept,
            residual: fit.residual,
            used_points: fit.used_points,
            expected_slope: expected,
        },
    )?;
    println!(
        "{kind} dim {} seed {}: slope {:.4} over {} points",
        a.dim, a.seed, fit.slope, fit.used_points
    );
    let params = Parameters {
        output_dir: out.root(),
        args: a,
    };
    let params = serde_json::to_value(params).map_err(|e| CliError::Other(e.to_string()))?;
    RunManifest::new("scaling", params, vec![a.seed]).finish(out, start.elapsed().as_secs_f64())?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SequenceResult {
    kind: String,
    csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent: Option<crate::spinbath::ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_error: Option<String>,
}

#[derive(Serialize)]
struct SpinbathSummary {
    config: BathConfig,
    nuclei: usize,
    pairs: usize,
    cutoff: Option<f64>,
    cutoff_diagnostics: crate::spinbath::CutoffDiagnostics,
    exact: bool,
    sequences: Vec<SequenceResult>,
}

fn load_config(path: Option<&Path>) -> Result<BathConfig, CliError> {
    let Some(path) = path else {
        return Ok(BathConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_spinbath(
    a: &SpinbathArgs,
    out: &mut OutputDir,
    start: Instant,
) -> Result<Outcome, CliError> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(c) = a.cutoff {
        if !(c > 0.0) {
            return Err(CliError::Usage("--cutoff must be positive".into()));
        }
        config.pair_cutoff = Some(c);
    }
    let kinds: Vec<SequenceKind> = a
        .sequences
        .iter()
        .map(|s| s.parse::<SequenceKind>().map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    if kinds.is_empty() {
        return Err(CliError::Usage("--sequences is empty".into()));
    }
    let grid = geometric_grid(a.t_min, a.t_max, a.points)
        .ok_or_else(|| CliError::Usage("need 0 < t_min <= t_max and at least one point".into()))?;
    let bath = build_bath(&config)?;
    if a.exact && bath.len() > MAX_EXACT_NUCLEI {
        return Err(SpinBathError::TooLarge(bath.len()).into());
    }
    let diagnostics = bath.default_cutoff(config.tail_fraction);
    let cutoff = config.pair_cutoff.or(Some(diagnostics.cutoff));
    let expansion = ClusterExpansion::new(&bath, cutoff);

    let results = with_workers(a.workers, || -> Result<Vec<SequenceResult>, CliError> {
        let mut results = Vec::new();
        for kind in &kinds {
            let curve = expansion.curve(*kind, &grid)?;
            let mut header = vec!["t", "v_e", "ln_v_e"];
            let exact: Option<Vec<f64>> = if a.exact {
                header.extend(["v_e_exact", "ln_v_e_exact"]);
                Some(
                    grid.iter()
                        .map(|&t| exact_bath_log_echo(&bath, &kind.build(t)?))
                        .collect::<Result<_, _>>()?,
                )
            } else {
                None
            };
            let rows: Vec<Vec<String>> = curve
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut row = vec![fmt_f64(p.t), fmt_f64(p.v_e), fmt_f64(p.ln_v_e)];
                    if let Some(ex) = &exact {
                        row.extend([fmt_f64(ex[i].exp()), fmt_f64(ex[i])]);
                    }
                    row
                })
                .collect();
            let name = format!("echo_{kind}.csv");
            out.write_csv(&name, &header, &rows)?;
            let (exponent, exponent_error) = match short_time_exponent(&curve) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            match (&exponent, &exponent_error) {
                (Some(f), _) => println!(
                    "{kind}: short-time exponent {:.3} over {} points",
                    f.exponent, f.points
                ),
                (_, Some(e)) => println!("{kind}: no exponent ({e})"),
                _ => {}
            }
            results.push(SequenceResult {
                kind: kind.to_string(),
                csv: name,
                exponent,
                exponent_error,
            });
        }
        Ok(results)
    })??;

    out.write_json(
        "spinbath_summary.json",
        &SpinbathSummary {
            config: config.clone(),
            nuclei: bath.len(),
            pairs: expansion.pairs().len(),
            cutoff,
            cutoff_diagnostics: diagnostics,
            exact: a.exact,
            sequences: results,
        },
    )?;
    println!(
        "{} nuclei, {} pairs within cutoff {:.4}",
        bath.len(),
        expansion.pairs().len(),
        cutoff.unwrap_or(f64::INFINITY)
    );
    let params = Parameters {
        output_dir: out.root(),
        args: a,
    };
    let mut params = serde_json::to_value(params).map_err(|e| CliError::Other(e.to_string()))?;
    params["resolved_config"] =
        serde_json::to_value(&config).map_err(|e| CliError::Other(e.to_string()))?;
    RunManifest::new("spinbath", params, vec![config.seed])
        .finish(out, start.elapsed().as_secs_f64())?;
    Ok(Outcome::Success)
}
