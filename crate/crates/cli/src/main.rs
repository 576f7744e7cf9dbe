//! `qfix`: build channels, solve and certify fixed points, and check the
//! truncation inequalities from JSON inputs.
//!
//! Every subcommand writes one JSON report (stdout or `--output`) and a
//! one-line summary on stderr.
//!
//! Exit codes: 0 success, 1 a check or solver failed, 2 malformed input,
//! 3 dimension cap exceeded.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qfix::fixpoint::Method;

use crate::config::{CliError, Settings};

#[derive(Parser)]
#[command(name = "qfix", version, about = "Fixed points of quantum channels at finite truncation")]
struct Cli {
    /// Strict JSON file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; falls back to the config file, then QFIX_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Lift the operator (256) and superoperator (64) dimension caps.
    #[arg(long, global = true)]
    allow_large: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cesaro,
    Spectral,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cesaro => Method::Cesaro,
            MethodArg::Spectral => Method::Spectral,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Find a fixed point of a channel.
    Solve {
        channel: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Cesàro iteration count.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Check trace preservation and Choi positivity.
    VerifyCptp {
        channel: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve a CTC scenario and assemble its consistent history.
    CtcRun {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Markov and Jensen truncation inequalities on sampled members of K.
    FockCheck {
        fock: PathBuf,
        constraints: PathBuf,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sample K and test whether a scenario's channel keeps it invariant.
    KProbe {
        scenario: PathBuf,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Rank-one truncation norm against its closed form.
    LemmaCheck {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        dim_max: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    let settings = Settings::resolve(cli.config.as_deref(), cli.seed, cli.output, cli.allow_large)?;
    match cli.command {
        Command::Solve { channel, method, n, tol } => {
            commands::solve(&settings, &channel, method.map(Into::into), n, tol)
        }
        Command::VerifyCptp { channel, tol } => commands::verify_cptp(&settings, &channel, tol),
        Command::CtcRun { scenario, method, n, tol } => {
            commands::ctc_run(&settings, &scenario, method.map(Into::into), n, tol)
        }
        Command::FockCheck { fock, constraints, epsilons, samples } => {
            commands::fock_check(&settings, &fock, &constraints, epsilons, samples)
        }
        Command::KProbe { scenario, constraints, samples } => {
            commands::k_probe(&settings, &scenario, constraints, samples)
        }
        Command::LemmaCheck { trials, dim_max } => commands::lemma_check(&settings, trials, dim_max),
    }
    .and_then(|outcome| {
        config::emit(&settings, &outcome)?;
        Ok(outcome)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            eprintln!("{}", outcome.summary);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}
