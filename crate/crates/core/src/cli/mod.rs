//! The `heligate` command line.

mod commands;

pub use commands::{spectrum_csv, spectrum_rows, SpectrumRow, SPECTRUM_HEADER};

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Error;
use crate::gate::GateKind;
use crate::voltage_opt::LossConfig;

#[derive(Debug, Parser)]
#[command(name = "heligate", version, about = "Two-electron gate simulation on electrode-defined double wells")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "HELIGATE_OUT", default_value = "heligate-out")]
    pub out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Time step in ns; overrides numerics.dt_ns.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Overrides numerics.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Six lowest energies and ζ along the voltage function.
    Spectrum {
        /// Comma-separated λ values; overrides spectrum.lambdas.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Switch off the Coulomb interaction.
        #[arg(long)]
        kappa_zero: bool,
    },
    /// Propagate the four qubit states through one gate.
    Propagate {
        #[arg(long)]
        t_ramp: Option<f64>,
        #[arg(long)]
        t_hold: Option<f64>,
        #[arg(long)]
        target: Option<GateKind>,
    },
    /// (t_ramp, t_hold) grid search.
    GateSearch,
    /// Dense window around a (t_ramp, t_hold) point.
    Sensitivity {
        /// `t_ramp,t_hold` in ns; overrides sensitivity.center_ns.
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
    },
    /// Optimize electrode voltages for one configuration's loss.
    VoltOpt {
        /// bare, I, II or III; overrides volt_opt.kind.
        #[arg(long)]
        kind: Option<LossConfig>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Element-wise gate report and overlap-file validation.
    Analyze {
        /// Gate JSON written by `propagate`.
        #[arg(long)]
        gate: Option<PathBuf>,
        /// Target gate (default: the one recorded in the JSON).
        #[arg(long)]
        target: Option<GateKind>,
        /// Overlap CSV files to validate.
        #[arg(long, num_args = 1..)]
        overlaps: Vec<PathBuf>,
    },
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(e) if e.is_numerical() => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

pub fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dt) = global.dt {
        cfg.numerics.dt_ns = dt;
    }
    if let Some(seed) = global.seed {
        cfg.numerics.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(&cli.global)?;
    commands::dispatch(&cli, cfg)
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
