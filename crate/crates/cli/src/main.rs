//! `dwell`: command-line front end for the double-well solvers.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid flags, 3 a solver
//! reported a breakdown (the report is still written).

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dwell::quad::{DEFAULT_PANELS, MIN_PANELS};
use dwell::{Error, State};

use crate::commands::Criterion;
use crate::report::Format;

const PANELS_VAR: &str = "DWELL_PANELS";

#[derive(Parser, Debug)]
#[command(
    name = "dwell",
    version,
    about = "Double-well ground state by Green-function iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Couplings {
    /// Comma-separated positive couplings.
    #[arg(long = "g", value_delimiter = ',', required = true, allow_negative_numbers = true,
          value_parser = parse_coupling)]
    g: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StateArg {
    Ev,
    Plus,
}

impl From<StateArg> for State {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::Ev => State::Even,
            StateArg::Plus => State::Plus,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// τ-iteration energies.
    Solve {
        #[command(flatten)]
        g: Couplings,
        #[arg(long, value_enum, default_value_t = StateArg::Ev)]
        state: StateArg,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=200))]
        iters: u64,
        #[command(flatten)]
        out: Output,
    },
    /// f-iteration energies with instability reporting.
    Fsolve {
        #[command(flatten)]
        g: Couplings,
        #[arg(long, value_enum, default_value_t = StateArg::Ev)]
        state: StateArg,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=200))]
        iters: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Partial sums of the 1/g series and their plateau.
    Asym {
        #[command(flatten)]
        g: Couplings,
        /// Number of series coefficients to generate.
        #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u64).range(3..=400))]
        terms: u64,
        /// Plateau by increment threshold.
        #[arg(long, conflicts_with = "digits", value_parser = parse_positive)]
        delta: Option<f64>,
        /// Plateau by agreement to this many decimals (default depends on g).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=15))]
        digits: Option<u32>,
        #[command(flatten)]
        out: Output,
    },
    /// Coefficient pyramid and series energies.
    Pyramid {
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=400))]
        rows: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Reproduce the benchmark tables.
    Tables {
        /// Comma-separated table numbers (1-4).
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4",
              value_parser = clap::value_parser!(u8).range(1..=4))]
        which: Vec<u8>,
        #[command(flatten)]
        out: Output,
    },
    /// Finite-difference reference energies.
    Oracle {
        #[command(flatten)]
        g: Couplings,
        /// Grid points on the half line (at least 2000).
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Check the trial perturbation potential against the convergence conditions.
    Check {
        #[command(flatten)]
        g: Couplings,
        #[arg(long, value_enum, default_value_t = StateArg::Ev)]
        state: StateArg,
        #[command(flatten)]
        out: Output,
    },
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {s}"))
    }
}

fn parse_coupling(s: &str) -> Result<f64, String> {
    parse_positive(s).map_err(|e| format!("coupling {e}"))
}

enum Failure {
    Usage(String),
    Io(String),
    Unstable(String),
}

fn panels() -> Result<usize, Failure> {
    match std::env::var(PANELS_VAR) {
        Err(_) => Ok(DEFAULT_PANELS),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= MIN_PANELS => Ok(n),
            _ => Err(Failure::Usage(format!(
                "{PANELS_VAR} must be an integer >= {MIN_PANELS}, got `{v}`"
            ))),
        },
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::InsufficientTerms { .. } => Failure::Usage(format!("{e}; increase --terms")),
        Error::OracleConfig(_) | Error::NonPositiveCoupling(_) | Error::TooFewPanels { .. } => {
            Failure::Usage(e.to_string())
        }
        Error::Diverged { .. } | Error::Unstable(_) => Failure::Unstable(e.to_string()),
        other => Failure::Io(other.to_string()),
    }
}

fn run(cli: Cli) -> Result<(report::Report, Output), Failure> {
    let (report, out) = match cli.command {
        Command::Solve {
            g,
            state,
            iters,
            out,
        } => (
            commands::solve(&g.g, state.into(), iters as usize, panels()?).map_err(classify)?,
            out,
        ),
        Command::Fsolve {
            g,
            state,
            iters,
            out,
        } => (
            commands::fsolve(&g.g, state.into(), iters as usize, panels()?).map_err(classify)?,
            out,
        ),
        Command::Asym {
            g,
            terms,
            delta,
            digits,
            out,
        } => {
            let crit = match (delta, digits) {
                (Some(d), _) => Criterion::Delta(d),
                (None, Some(d)) => Criterion::Digits(d),
                (None, None) => Criterion::Auto,
            };
            (
                commands::asym(&g.g, terms as usize, &crit).map_err(classify)?,
                out,
            )
        }
        Command::Pyramid { rows, out } => {
            (commands::pyramid(rows as usize).map_err(classify)?, out)
        }
        Command::Tables { which, out } => {
            (commands::tables(&which, panels()?).map_err(classify)?, out)
        }
        Command::Oracle { g, points, out } => {
            (commands::oracle(&g.g, points).map_err(classify)?, out)
        }
        Command::Check { g, state, out } => (
            commands::check(&g.g, state.into(), panels()?).map_err(classify)?,
            out,
        ),
    };
    Ok((report, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, out) = match run(cli) {
        Ok(v) => v,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            return ExitCode::from(2);
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Unstable(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(3);
        }
    };
    let text = match report.render(out.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &out.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| e.to_string())
        }
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    if report.unstable {
        eprintln!("warning: iteration became unstable; see the instability column");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
