use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use ando_cli::config::{BatterySpec, ExperimentConfig, OutputFormat, Overrides, Pipeline};
use ando_cli::{load_config, run, CliError};
use ando_core::ando::PairKind;
use ando_core::report::VerificationReport;
use clap::{Args, Parser, Subcommand};

/// Environment variable holding the default identity tolerance.
const TOLERANCE_VAR: &str = "ANDO_TOLERANCE";

#[derive(Parser)]
#[command(name = "ando", version, about = "Dilation and inequality checks on matrix tuples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Domain membership, Poisson kernel and (optionally) constrained-model checks for T1.
    CheckModel(RunArgs),
    /// Colligation, transfer function and dilation identity for (T1, T1', T2).
    Dilate(RunArgs),
    /// Inequalities for a commuting pair (T1, T2) through explicit dilations.
    Verify(RunArgs),
    /// Seeded battery of random commuting pairs.
    Battery(RunArgs),
    /// Re-render a structured report; exits nonzero when it records a failure.
    Report {
        path: PathBuf,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Truncation level N.
    #[arg(long)]
    level: Option<usize>,
    /// Identity tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Inequality slack tolerance.
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    min_dim: Option<usize>,
    #[arg(long)]
    max_dim: Option<usize>,
    /// Comma-separated pair kinds.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    #[arg(long)]
    grid_resolution: Option<usize>,
    #[arg(long)]
    grid_allowance: Option<f64>,
    #[arg(long)]
    free_level_cap: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Also write the structured report to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Usage(format!("{name} must be positive, got {x}"))),
        _ => Ok(v),
    }
}

fn overrides(pipeline: Pipeline, a: &RunArgs) -> Result<Overrides, CliError> {
    let kinds = a
        .kinds
        .as_ref()
        .map(|ks| ks.iter().map(|k| PairKind::from_str(k)).collect::<Result<Vec<_>, _>>())
        .transpose()
        .map_err(|e| CliError::Usage(format!("--kinds: {e}")))?;
    let default_tol = match std::env::var(TOLERANCE_VAR) {
        Ok(s) => {
            let v = s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{TOLERANCE_VAR}: '{s}' is not a number")))?;
            positive(TOLERANCE_VAR, Some(v))?
        }
        Err(_) => None,
    };
    Ok(Overrides {
        pipeline: Some(pipeline),
        level: a.level,
        identity_tol: positive("--tol", a.tol)?,
        slack_tol: positive("--slack", a.slack)?,
        battery: BatterySpec {
            seed: a.seed,
            count: a.count,
            min_dim: a.min_dim,
            max_dim: a.max_dim,
            kinds,
            grid_resolution: a.grid_resolution,
            grid_allowance: a.grid_allowance,
            free_level_cap: a.free_level_cap,
        },
        format: a.format,
        default_tol,
    })
}

fn emit(rep: &VerificationReport, format: OutputFormat) {
    match format {
        OutputFormat::Structured => print!("{}", rep.to_structured()),
        OutputFormat::Table => print!("{}", rep.to_table()),
        OutputFormat::Both => {
            print!("{}", rep.to_structured());
            eprint!("{}", rep.to_table());
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (pipeline, args) = match cli.command {
        Command::Report { path, format } => {
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let rep = VerificationReport::parse_structured(&text)?;
            emit(&rep, format.unwrap_or(OutputFormat::Table));
            return Ok(rep.passed());
        }
        Command::CheckModel(a) => (Pipeline::Kernel, a),
        Command::Dilate(a) => (Pipeline::Dilation, a),
        Command::Verify(a) => (Pipeline::Verify, a),
        Command::Battery(a) => (Pipeline::Battery, a),
    };
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    for w in cfg.apply(overrides(pipeline, &args)?) {
        eprintln!("warning: {w}");
    }
    let rep = run(&cfg);
    if let Some(path) = &args.output {
        std::fs::write(path, rep.to_structured()).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    emit(&rep, cfg.format.unwrap_or_default());
    Ok(rep.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
