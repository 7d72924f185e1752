//! Command-line front end: runs scenarios, writes CSV traces and correlation
//! reports, and compares deltas across scenarios.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ensemble::run_ensemble;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scenario::{builtin_scenario, load_config, BuiltinScenario, ScenarioConfig};
use crate::stats::{correlation_report, ConvergenceTrace, CorrelationReport};

/// Stream index reserved for the bootstrap; trials use indices 0..N.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Debug)]
pub enum CliError {
    /// Bad request or config; exits with status 2.
    Usage(String),
    /// Simulation or output failure; exits with status 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal(_) | Error::Io { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Builtin(BuiltinScenario),
    ConfigPath(PathBuf),
}

/// A fully specified `run` invocation.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub source: ScenarioSource,
    pub n: u64,
    pub master_seed: u64,
    pub checkpoint_count: usize,
    pub spacing: Spacing,
    pub bootstrap: u32,
    pub ci_level: f64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
}

/// A fully specified `compare` invocation over built-in scenarios.
#[derive(Debug, Clone)]
pub struct CompareRequest {
    pub scenarios: Vec<String>,
    pub n: u64,
    pub master_seed: u64,
    pub checkpoint_count: usize,
    pub spacing: Spacing,
    pub bootstrap: u32,
    pub ci_level: f64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Parser, Debug)]
#[command(
    name = "billiards",
    version,
    about = "Event-driven hard-disk billiard ensembles and their event correlations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario; writes trace.csv and report.csv.
    Run(RunArgs),
    /// Run several built-in scenarios with the same N and seed; writes compare.csv.
    Compare(CompareArgs),
    /// List the built-in scenarios and their parameters.
    Scenarios,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Number of tables to simulate.
    #[arg(long)]
    n: u64,
    /// Master seed; every trial derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of convergence-trace checkpoints.
    #[arg(long, default_value_t = 50)]
    checkpoints: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    checkpoint_spacing: Spacing,
    /// Bootstrap resamples for the delta confidence interval.
    #[arg(long, default_value_t = 1000)]
    bootstrap: u32,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Worker threads (default: all cores). Does not affect the results.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in scenario name (basic, brownian, long_time, fast_cue).
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Path to a scenario config in JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Built-in scenario names to run under identical conditions.
    scenarios: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => build_run_request(args).and_then(|req| cmd_run(&req)),
        Command::Compare(args) => cmd_compare(&CompareRequest {
            scenarios: args.scenarios,
            n: args.common.n,
            master_seed: args.common.seed,
            checkpoint_count: args.common.checkpoints,
            spacing: args.common.checkpoint_spacing,
            bootstrap: args.common.bootstrap,
            ci_level: args.common.ci_level,
            workers: args.common.workers,
            out_dir: args.common.out,
        }),
        Command::Scenarios => {
            print_scenarios();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn build_run_request(args: RunArgs) -> std::result::Result<RunRequest, CliError> {
    let source = match (args.scenario, args.config) {
        (Some(name), None) => ScenarioSource::Builtin(BuiltinScenario::parse(&name)?),
        (None, Some(path)) => ScenarioSource::ConfigPath(path),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --scenario or --config is required".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    Ok(RunRequest {
        source,
        n: args.common.n,
        master_seed: args.common.seed,
        checkpoint_count: args.common.checkpoints,
        spacing: args.common.checkpoint_spacing,
        bootstrap: args.common.bootstrap,
        ci_level: args.common.ci_level,
        workers: args.common.workers,
        out_dir: args.common.out,
    })
}

fn validate_common(
    n: u64,
    checkpoint_count: usize,
    bootstrap: u32,
    ci_level: f64,
    workers: Option<usize>,
) -> std::result::Result<(), CliError> {
    if n < 1 {
        return Err(CliError::Usage("--n must be at least 1".to_string()));
    }
    if checkpoint_count < 1 {
        return Err(CliError::Usage("--checkpoints must be at least 1".to_string()));
    }
    if bootstrap < 100 {
        return Err(CliError::Usage("--bootstrap must be at least 100".to_string()));
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(CliError::Usage("--ci-level must lie strictly between 0 and 1".to_string()));
    }
    if workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".to_string()));
    }
    Ok(())
}

fn load_source(source: &ScenarioSource) -> std::result::Result<(String, ScenarioConfig), CliError> {
    match source {
        ScenarioSource::Builtin(name) => Ok((name.name().to_string(), builtin_scenario(*name))),
        ScenarioSource::ConfigPath(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            let config = load_config(&text)?;
            Ok((path.display().to_string(), config))
        }
    }
}

/// Runs a closure on a dedicated pool when a worker count was requested.
fn with_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> std::result::Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Internal(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evenly spaced checkpoint set ending exactly at n.
pub fn make_checkpoints(n: u64, count: usize, spacing: Spacing) -> Vec<u64> {
    let mut points = Vec::with_capacity(count);
    match spacing {
        Spacing::Log => {
            let lo = 100.min(n) as f64;
            let hi = n as f64;
            for i in 0..count {
                let f = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
                points.push((lo * (hi / lo).powf(f)).round() as u64);
            }
        }
        Spacing::Linear => {
            for i in 1..=count {
                points.push(((i as f64 / count as f64) * n as f64).round() as u64);
            }
        }
    }
    points.iter_mut().for_each(|p| *p = (*p).clamp(1, n));
    *points.last_mut().unwrap() = n;
    points.dedup();
    points
}

fn scenario_report(
    config: &ScenarioConfig,
    n: u64,
    seed: u64,
    checkpoints: &[u64],
    bootstrap: u32,
    ci_level: f64,
) -> std::result::Result<(ConvergenceTrace, CorrelationReport), CliError> {
    let result = run_ensemble(config, n, seed, checkpoints)?;
    let mut stream = RandomStream::new(seed, BOOTSTRAP_STREAM);
    let report = correlation_report(&result.outcomes, bootstrap, ci_level, &mut stream)?;
    Ok((result.trace, report))
}

/// Executes a `run` request end to end. No files are touched until the
/// request and config have validated.
pub fn cmd_run(request: &RunRequest) -> std::result::Result<(), CliError> {
    validate_common(
        request.n,
        request.checkpoint_count,
        request.bootstrap,
        request.ci_level,
        request.workers,
    )?;
    let (label, config) = load_source(&request.source)?;
    config.validate()?;

    let checkpoints = make_checkpoints(request.n, request.checkpoint_count, request.spacing);
    let (trace, report) = with_pool(request.workers, || {
        scenario_report(
            &config,
            request.n,
            request.master_seed,
            &checkpoints,
            request.bootstrap,
            request.ci_level,
        )
    })??;

    fs::create_dir_all(&request.out_dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            request.out_dir.display()
        ))
    })?;
    write_trace_csv(&trace, &request.out_dir.join("trace.csv"))?;
    write_report_csv(
        &request.out_dir.join("report.csv"),
        &[(label.clone(), request.n, report.clone())],
    )?;

    print_report(&label, request.n, request.master_seed, &report);
    Ok(())
}

/// Runs each named scenario with identical N and seed, writes compare.csv,
/// and prints the delta ordering.
pub fn cmd_compare(request: &CompareRequest) -> std::result::Result<(), CliError> {
    if request.scenarios.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least 2 scenarios, got {}",
            request.scenarios.len()
        )));
    }
    validate_common(
        request.n,
        request.checkpoint_count,
        request.bootstrap,
        request.ci_level,
        request.workers,
    )?;
    let mut configs = Vec::new();
    for name in &request.scenarios {
        let builtin = BuiltinScenario::parse(name)?;
        configs.push((builtin.name().to_string(), builtin_scenario(builtin)));
    }

    let checkpoints = make_checkpoints(request.n, request.checkpoint_count, request.spacing);
    let mut rows: Vec<(String, u64, CorrelationReport)> = Vec::new();
    for (label, config) in &configs {
        let (_, report) = with_pool(request.workers, || {
            scenario_report(
                config,
                request.n,
                request.master_seed,
                &checkpoints,
                request.bootstrap,
                request.ci_level,
            )
        })??;
        print_report(label, request.n, request.master_seed, &report);
        rows.push((label.clone(), request.n, report));
    }

    fs::create_dir_all(&request.out_dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            request.out_dir.display()
        ))
    })?;
    write_report_csv(&request.out_dir.join("compare.csv"), &rows)?;

    let mut ordered: Vec<&(String, u64, CorrelationReport)> = rows.iter().collect();
    ordered.sort_by(|a, b| b.2.delta.partial_cmp(&a.2.delta).unwrap());
    let ordering = ordered
        .iter()
        .map(|(label, _, r)| format!("{label} ({:.6})", r.delta))
        .collect::<Vec<_>>()
        .join(" > ");
    println!("delta ordering: {ordering}");
    Ok(())
}

fn print_scenarios() {
    println!("built-in scenarios (600x300 table, 11 disks of radius 20):");
    println!("  basic      cue at (200, 155 +/- 3) with v = (20, 0), ten resting targets,");
    println!("             green square (150, 270)-(240, 180) watches the cue,");
    println!("             red square (430, 120)-(520, 30) watches the ball at (420, 240),");
    println!("             horizon 50 (500 ticks of 0.1)");
    println!("  brownian   basic, but all positions uniform on [20, 580] x [20, 280]");
    println!("             and all velocities uniform on [-20, 20]^2, no overlaps allowed");
    println!("  long_time  basic with the horizon doubled (1000 ticks)");
    println!("  fast_cue   basic with the cue velocity multiplied by 5");
}

fn print_report(label: &str, n: u64, seed: u64, r: &CorrelationReport) {
    println!("{label}: n={n} seed={seed}");
    println!("  P(E1)      = {:.6}", r.p1_hat);
    println!("  P(E2)      = {:.6}", r.p2_hat);
    println!("  P(E1,E2)   = {:.6}", r.p12_hat);
    println!("  P(E1)P(E2) = {:.6}", r.product);
    println!(
        "  delta      = {:.6} ({:.0}% CI half-width {:.6}, {})",
        r.delta,
        r.ci_level * 100.0,
        r.ci_halfwidth,
        if r.significant { "significant" } else { "not significant" }
    );
}

/// Full-precision float field: 17 significant digits, locale-free.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a convergence trace as CSV: header `n,p1,p2,p12,p1p2`, one row per
/// checkpoint, 17 significant digits, LF endings.
pub fn write_trace_csv(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    let mut out = String::from("n,p1,p2,p12,p1p2\n");
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.n,
            fmt_float(row.p1),
            fmt_float(row.p2),
            fmt_float(row.p12),
            fmt_float(row.product)
        );
    }
    write_file(path, &out)
}

/// Writes correlation reports as CSV, one row per scenario.
pub fn write_report_csv(
    path: &Path,
    rows: &[(String, u64, CorrelationReport)],
) -> Result<()> {
    let mut out =
        String::from("scenario,n,p1,p2,p12,p1p2,delta,ci_halfwidth,ci_level,significant\n");
    for (scenario, n, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            scenario,
            n,
            fmt_float(r.p1_hat),
            fmt_float(r.p2_hat),
            fmt_float(r.p12_hat),
            fmt_float(r.product),
            fmt_float(r.delta),
            fmt_float(r.ci_halfwidth),
            r.ci_level,
            r.significant
        );
    }
    write_file(path, &out)
}
