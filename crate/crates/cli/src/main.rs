//! `entrysolve`: optimal entry thresholds, value curves and policy simulations
//! from a run configuration.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::commands::{CurveOptions, SimulateOptions};
use crate::config::{ConfigFormat, OutputFormat, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "entrysolve", version, about = "Optimal entry under forced exits and catastrophe risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat `key = value`, or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Read the configuration as JSON whatever its extension.
    #[arg(long)]
    json_config: bool,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Threshold, coefficients, diagnostics and the success-probability audit.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Success probabilities for the audit (default 0.2,0.4,0.6,0.8,1.0).
        #[arg(long)]
        p_list: Option<String>,
    },
    /// Value functions on a uniform state grid, one column block per probability.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Comma-separated success probabilities (default: economics.p).
        #[arg(long)]
        p_list: Option<String>,
    },
    /// Monte Carlo estimates of threshold policies at scaled thresholds.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated threshold multipliers.
        #[arg(long)]
        multipliers: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let format = common.json_config.then_some(ConfigFormat::Json);
    config::load(&common.config, format)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io { path: "<json>".into(), source: e.into() })?;
    s.push('\n');
    Ok(s)
}

fn emit(common: &Common, cfg: &RunConfig, default: OutputFormat, csv: impl FnOnce() -> CliResult<String>, json: impl FnOnce() -> CliResult<String>) -> CliResult<()> {
    let format = common.format.or(cfg.output.format).unwrap_or(default);
    let text = match format {
        OutputFormat::Csv => csv()?,
        OutputFormat::Json => json()?,
    };
    let path = common.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match path {
        Some(path) => write_file(&path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { common, p_list } => {
            let cfg = load(&common)?;
            let report = commands::cmd_solve(&cfg, p_list.as_deref())?;
            emit(&common, &cfg, OutputFormat::Json, || report.to_csv(), || to_json(&report))
        }
        Command::Curve { common, x_min, x_max, points, p_list } => {
            let cfg = load(&common)?;
            let table = commands::cmd_curve(&cfg, &CurveOptions { x_min, x_max, points, p_list })?;
            emit(&common, &cfg, OutputFormat::Csv, || table.to_csv(), || to_json(&table))
        }
        Command::Simulate { common, multipliers, seed, paths } => {
            let cfg = load(&common)?;
            let table = commands::cmd_simulate(&cfg, &SimulateOptions { multipliers, seed, paths })?;
            emit(&common, &cfg, OutputFormat::Csv, || table.to_csv(), || to_json(&table))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENTRYSOLVE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
