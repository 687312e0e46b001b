//! Batch driver behind the `ecl` binary.
//!
//! Exit codes: 0 when every verdict is PASS or INCONCLUSIVE, 1 for an
//! invalid config, 2 when the solver does not converge, 3 for any FAIL,
//! 4 for numerical or I/O failures.

pub mod config;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{load_config, ConfigError, ScenarioConfig};
use scenario::{SweepError, SWEEP_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ecl", version, about = "Entropic interpolation concavity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and write its curve and verdict.
    Run {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Interior sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Margin tolerance for the verdict.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Repeat a scenario over several horizons.
    #[command(name = "sweep-T")]
    SweepT {
        config: PathBuf,
        #[arg(long = "T", value_delimiter = ',', required = true)]
        horizons: Vec<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn exit_for(err: &Error) -> i32 {
    match err.root() {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::NumericalFailure { .. } | Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn report(err: &dyn std::fmt::Display) {
    eprintln!("ecl: {err}");
}

fn configure_threads() {
    if let Some(n) = std::env::var("ECL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a pool may already exist when called twice in one process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn out_dir(cfg: &ScenarioConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn write(path: &Path, text: &str) -> Result<(), i32> {
    output::write_atomic(path, text).map_err(|e| {
        report(&format!("cannot write {}: {e}", path.display()));
        EXIT_NUMERICAL
    })
}

fn load(path: &Path) -> Result<ScenarioConfig, i32> {
    load_config(path).map_err(|e| {
        report(&e);
        EXIT_CONFIG
    })
}

fn config_err(e: ConfigError) -> i32 {
    report(&e);
    EXIT_CONFIG
}

fn run_once(
    cfg: &ScenarioConfig,
    dir: &Path,
    horizon: f64,
    samples: usize,
    tol: Option<f64>,
    quiet: bool,
) -> Result<i32, i32> {
    let op = scenario::build_operator(cfg).map_err(config_err)?;
    let (u, v, heat) = scenario::build_marginals(cfg, &op, horizon).map_err(config_err)?;
    let outcome = scenario::execute(cfg, &op, &u, &v, heat, horizon, samples, tol).map_err(|e| {
        report(&e);
        exit_for(&e)
    })?;
    let verdicts = output::verdict_report(&outcome.records);
    write(&dir.join(&cfg.curve_file), &output::curve_csv(&outcome.curve))?;
    write(&dir.join(&cfg.verdict_file), &verdicts)?;
    if !quiet {
        print!("{verdicts}");
    }
    Ok(if outcome.any_fail() { EXIT_FAIL } else { EXIT_OK })
}

fn run(config: &Path, out: Option<PathBuf>, samples: Option<usize>, tol: Option<f64>, quiet: bool) -> Result<i32, i32> {
    let cfg = load(config)?;
    if samples == Some(0) || tol.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        report(&"--samples and --tol must be positive");
        return Err(EXIT_CONFIG);
    }
    let dir = out_dir(&cfg, out);
    run_once(&cfg, &dir, cfg.horizon, samples.unwrap_or(cfg.samples), tol.or(cfg.tol_margin), quiet)
}

fn sweep(config: &Path, horizons: &[f64], out: Option<PathBuf>, quiet: bool) -> Result<i32, i32> {
    let cfg = load(config)?;
    let op = scenario::build_operator(&cfg).map_err(config_err)?;
    scenario::check_sweep_preconditions(&cfg, &op, horizons).map_err(config_err)?;
    let rows = scenario::sweep(&cfg, &op, horizons).map_err(|e| match e {
        SweepError::Config(e) => config_err(e),
        SweepError::Run(e) => {
            report(&e);
            exit_for(&e)
        }
    })?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            output::sci(r.horizon),
            output::sci(r.energy),
            output::sci(r.heat_distance),
            output::sci(r.g_defect),
            r.iterations,
            output::sci(r.residual)
        ));
    }
    let dir = out_dir(&cfg, out);
    let mut code = EXIT_OK;
    if let [horizon] = horizons {
        code = run_once(&cfg, &dir, *horizon, cfg.samples, cfg.tol_margin, quiet)?;
    }
    write(&dir.join(&cfg.sweep_file), &csv)?;
    if !quiet {
        print!("{csv}");
    }
    Ok(code)
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Run { config, out_dir, samples, tol, quiet } => run(&config, out_dir, samples, tol, quiet),
        Command::SweepT { config, horizons, out_dir, quiet } => sweep(&config, &horizons, out_dir, quiet),
    };
    result.unwrap_or_else(|code| code)
}
