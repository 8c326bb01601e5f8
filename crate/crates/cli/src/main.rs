//! `idm-odds`: evaluate, simulate, fit and cross-check the illness-death
//! prevalence-odds model from a JSON run configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idm_odds::GroupEvaluation;

use commands::{Context, CrosscheckArgs, EvaluateArgs, FitArgs, MethodChoice, SimulateArgs};
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    NotConverged(String),
}

impl From<idm_odds::Error> for CliError {
    fn from(e: idm_odds::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "idm-odds", version, about = "Prevalence odds in the illness-death model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; the reference study when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `output.directory`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Prevalence-odds curve at one calendar time.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100.0)]
        t: f64,
        #[arg(long, default_value_t = 30.0)]
        age_min: f64,
        #[arg(long, default_value_t = 100.0)]
        age_max: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        #[arg(long, value_enum, default_value_t = MethodChoice::Analytic)]
        method: MethodChoice,
    },
    /// Simulated current-status tables.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        births_per_year: Option<f64>,
        /// Also dump every simulated life course.
        #[arg(long)]
        ledger: bool,
    },
    /// Maximum-likelihood fit of the mortality ratio.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Table in `k,age_lo,age_hi,n,c` layout; the bundled reference
        /// table when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_group_evaluation)]
        group_evaluation: Option<GroupEvaluation>,
    },
    /// Internal consistency checks at one point of the Lexis plane.
    Crosscheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100.0)]
        t: f64,
        #[arg(long, default_value_t = 60.0)]
        age: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
    },
}

fn parse_group_evaluation(s: &str) -> Result<GroupEvaluation, String> {
    match s {
        "midpoint" => Ok(GroupEvaluation::Midpoint),
        "averaged" => Ok(GroupEvaluation::Averaged),
        _ => Err("expected `midpoint` or `averaged`".into()),
    }
}

fn load_context(common: &Common) -> Result<Context, CliError> {
    let (config, config_bytes) = match &common.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
            (RunConfig::parse(&text)?, bytes)
        }
        None => {
            let cfg = RunConfig::reference();
            let bytes = serde_json::to_vec(&cfg).map_err(|e| CliError::Input(e.to_string()))?;
            (cfg, bytes)
        }
    };
    let output_dir = common
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output.directory.clone());
    Ok(Context {
        config,
        config_bytes,
        output_dir,
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("IDM_ODDS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("IDM_ODDS_THREADS={value:?} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Evaluate {
            common,
            t,
            age_min,
            age_max,
            step,
            method,
        } => commands::evaluate(
            &load_context(&common)?,
            &EvaluateArgs {
                t,
                age_min,
                age_max,
                step,
                method,
            },
        ),
        Command::Simulate {
            common,
            seed,
            replicates,
            births_per_year,
            ledger,
        } => commands::simulate(
            &load_context(&common)?,
            &SimulateArgs {
                seed,
                replicates,
                births_per_year,
                ledger,
            },
        ),
        Command::Fit {
            common,
            data,
            group_evaluation,
        } => commands::fit_command(
            &load_context(&common)?,
            &FitArgs {
                data,
                group_evaluation,
            },
        ),
        Command::Crosscheck { common, t, age, h } => {
            commands::crosscheck(&load_context(&common)?, &CrosscheckArgs { t, age, h })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
