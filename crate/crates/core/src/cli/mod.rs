//! Command-line driver: `starcyl list` and `starcyl run <experiment|all>`.
//!
//! Exit codes are 0 when every verdict passes, 1 when any verdict fails and 2 on errors.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use config::{Config, ConfigError};
pub use experiments::{run_experiment, EXPERIMENTS};
pub use report::{emit_report, Format, Report, ReportError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("unknown experiment `{0}` (see `starcyl list`)")]
    UnknownExperiment(String),
    #[error(transparent)]
    Fourier(#[from] crate::fourier::FourierError),
    #[error(transparent)]
    Star(#[from] crate::star::StarError),
    #[error(transparent)]
    Crossed(#[from] crate::crossed::CrossedError),
    #[error(transparent)]
    Clifford(#[from] crate::clifford::CliffordError),
    #[error(transparent)]
    Operator(#[from] crate::operator::OperatorError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error(transparent)]
    Cocycle(#[from] crate::cocycle::CocycleError),
    #[error(transparent)]
    Morita(#[from] crate::morita::MoritaError),
    #[error(transparent)]
    Fit(#[from] crate::fit::FitError),
    #[error("STARCYL_THREADS={0} is not a positive integer")]
    Threads(String),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Parser)]
#[command(
    name = "starcyl",
    version,
    about = "Numerical experiments on deformed cylinders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the experiments
    List,
    /// Run one experiment, or `all`
    Run {
        experiment: String,
        /// Config file; unspecified keys keep their defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json (overrides output.format)
        #[arg(long)]
        format: Option<String>,
        /// Overrides the seed key
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the default config file
    Config,
}

#[derive(Serialize)]
struct Timing {
    experiment: String,
    seconds: f64,
    threads: usize,
}

/// Parses the arguments, runs and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn init_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("STARCYL_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or(CliError::Threads(v))?;
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(rayon::current_num_threads())
}

fn write_timing(dir: &Path, t: &Timing) -> Result<(), CliError> {
    let path = dir.join(format!("{}.timing.json", t.experiment));
    let io = |e: &dyn std::fmt::Display| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let text = serde_json::to_string_pretty(t).map_err(|e| io(&e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io(&e))
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::List => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<20} {about}");
            }
            Ok(true)
        }
        Command::Config => {
            print!("{}", config::default_text());
            Ok(true)
        }
        Command::Run {
            experiment,
            config,
            out,
            format,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => Config::load(&p)?,
                None => Config::default(),
            };
            if let Some(d) = out {
                cfg.set("output.dir", &d.display().to_string())?;
            }
            if let Some(f) = format {
                cfg.set("output.format", &f)?;
            }
            if let Some(s) = seed {
                cfg.set("seed", &s.to_string())?;
            }
            let names: Vec<&str> = if experiment == "all" {
                EXPERIMENTS.iter().map(|e| e.0).collect()
            } else if EXPERIMENTS.iter().any(|e| e.0 == experiment) {
                vec![experiment.as_str()]
            } else {
                return Err(CliError::UnknownExperiment(experiment));
            };
            let threads = init_threads()?;
            let dir = PathBuf::from(cfg.text("output.dir"));
            let fmt: Format = cfg
                .text("output.format")
                .parse()
                .expect("validated by the config schema");
            let mut all = true;
            for name in names {
                let start = Instant::now();
                let report = run_experiment(name, &cfg)?;
                let seconds = start.elapsed().as_secs_f64();
                emit_report(&report, fmt, &dir)?;
                write_timing(
                    &dir,
                    &Timing {
                        experiment: name.to_string(),
                        seconds,
                        threads,
                    },
                )?;
                let ok = report.passed();
                all &= ok;
                let detail = report
                    .failures()
                    .iter()
                    .map(|(t, n)| format!("{t}: {n} failed"))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!(
                    "{:<20} {}  {:>8.1}s  {}",
                    name,
                    if ok { "PASS" } else { "FAIL" },
                    seconds,
                    detail
                );
            }
            Ok(all)
        }
    }
}
