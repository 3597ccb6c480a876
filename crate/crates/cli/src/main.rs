//! `vglass`: batch front end for Parisi-functional evaluation, the variational
//! solvers and the finite-N simulator.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, Format};

#[derive(Parser, Debug)]
#[command(name = "vglass", version, about = "Vector spin glass free energies: evaluation, variational formulas, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Result file; a manifest is written next to it. Defaults to standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the global seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Include optimizer traces in solve results.
    #[arg(long, global = true)]
    trace: bool,
    /// Add the cascade-oracle comparison to eval.
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the hypotheses on ξ (nonnegativity, monotonicity, convexity).
    Validate,
    /// Evaluate the Parisi functional at a given step path.
    Eval,
    /// Run a variational solver (parisi, grad, parisi-constrained, pan, hj, xistar, hopf, equivalence).
    Solve,
    /// Finite-N simulation sweeps.
    Simulate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Domain(vglass::Error),
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Domain(e @ vglass::Error::EnumerationGuard { .. }) => {
                write!(f, "{e}; use \"mode\": \"metropolis\" in the simulate block for larger N")
            }
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<vglass::Error> for CliError {
    fn from(e: vglass::Error) -> Self {
        CliError::Domain(e)
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let c = cli.common;
    if let Some(j) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::config(format!("--jobs: {e}")))?;
    }
    let path = c.config.ok_or_else(|| CliError::config("--config is required"))?;
    let mut cfg = Config::load(&path)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = c.output {
        cfg.output.path = Some(o);
    }
    if let Some(f) = c.format {
        cfg.output.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    cfg.trace |= c.trace;
    if c.oracle {
        if let Some(ev) = cfg.eval.as_mut() {
            ev.oracle.get_or_insert_with(Default::default);
        }
    }
    if cli.command == Command::Validate && cfg.validate.is_none() {
        cfg.validate = Some(Default::default());
    }
    cfg.resolve_seeds();

    let outcome = match cli.command {
        Command::Validate => commands::validate(&cfg)?,
        Command::Eval => commands::eval(&cfg)?,
        Command::Solve => commands::solve(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
    };
    report::emit(&cfg, &outcome)?;
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("vglass: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
