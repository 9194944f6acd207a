//! Command-line front end: one subcommand per study, JSON run configs, and
//! CSV/JSON artifacts stamped with the config hash.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{run_command, Outcome};
pub use config::{load_config, parse_config, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INADMISSIBLE: i32 = 2;
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("inadmissible profile: {0}")]
    Inadmissible(String),
    #[error("quadrature budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Core(hyperosc::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<hyperosc::Error> for CliError {
    fn from(e: hyperosc::Error) -> Self {
        use hyperosc::Error as E;
        match e {
            E::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            E::SignViolation { .. } | E::DegenerateDerivative(_) => CliError::Inadmissible(e.to_string()),
            E::InvalidParams(_) | E::InvalidGrid(_) | E::NonconvergentTail | E::DomainError(_) | E::NonPositiveRadius(_) => {
                CliError::Usage(e.to_string())
            }
            E::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Inadmissible(_) => EXIT_INADMISSIBLE,
            CliError::Budget(_) => EXIT_BUDGET,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperosc", version, about = "Studies of an oscillatory hypersingular operator along radial hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; every field has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized sweeps (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Dotted key=value assignment applied to the config, e.g. epsilon.factor=10.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Certify the profile's admissibility constants.
    ProfileCheck,
    /// Brute-force the phase lower bound on seeded random (ξ, l).
    LemmaCheck {
        /// Number of random configurations (overrides lemma_check.n_configs).
        #[arg(long)]
        n_configs: Option<usize>,
    },
    /// Tabulate the multiplier on a frequency lattice.
    Multiplier,
    /// Fit the decay of the dyadic pieces in l.
    Decay,
    /// Compare |m| with its Sobolev envelope and run the smoothing ladder.
    SobolevEnvelope,
    /// Cross-validate spectral and direct application.
    Apply,
    /// L^p sweep and dyadic L¹ check.
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ProfileCheck => "profile-check",
            Command::LemmaCheck { .. } => "lemma-check",
            Command::Multiplier => "multiplier",
            Command::Decay => "decay",
            Command::SobolevEnvelope => "sobolev-envelope",
            Command::Apply => "apply",
            Command::Sweep => "sweep",
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            if outcome.pass {
                EXIT_PASS
            } else if matches!(cli.command, Command::ProfileCheck) {
                EXIT_INADMISSIBLE
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut cfg = load_config(cli.config.as_deref(), &overrides)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Command::LemmaCheck { n_configs: Some(n) } = cli.command {
        cfg.lemma_check.n_configs = n;
    }
    match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| run_command(cli.command, &cfg))
        }
        None => run_command(cli.command, &cfg),
    }
}
