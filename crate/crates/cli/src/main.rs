use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use steerlab::detect::{SolveStatus, DEFAULT_TOL};
use steerlab_cli::commands;
use steerlab_cli::report::{render, write_output};
use steerlab_cli::scenarios;

#[derive(Parser)]
#[command(name = "steerlab", version, about = "Entanglement, steering and nonlocality checks")]
struct Cli {
    /// Decision tolerance for feasibility verdicts.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Werner states that are entangled but not POVM-steerable.
    Entvsteer {
        #[arg(long = "d")]
        d: usize,
        #[arg(long)]
        alpha: f64,
        /// Needed for d >= 4, where bases are Haar-sampled.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Two-way steerable states local for the tested Bell settings.
    Steervsnl {
        #[arg(long)]
        q: f64,
    },
    /// One-way steering of the flag-extended state.
    Oneway {
        #[arg(long)]
        seed: u64,
    },
    /// Hidden steering revealed by local qubit filters.
    Hidden {
        #[arg(long = "d")]
        d: usize,
    },
    /// Steering or Bell test of a state, assemblage or behavior file.
    Detect {
        input: PathBuf,
        /// pauli3, mub2, mub3, trine, icosa6 or sphere<dim>:<settings>.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solves a conic problem file.
    Solve { input: PathBuf },
}

fn read_input(path: &Path) -> steerlab::Result<String> {
    fs::read_to_string(path).map_err(|e| steerlab::Error::Parse(format!("{}: {e}", path.display())))
}

/// Exit code for a failure: 2 for bad input, 3 for solver trouble.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<steerlab::Error>() {
        Some(steerlab::Error::Numeric(_) | steerlab::Error::Bisection(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let out = cli.out.as_deref();
    let tol = cli.tol;
    let text = match cli.cmd {
        Command::Entvsteer { d, alpha, seed } => render(&scenarios::entanglement_vs_steering(d, alpha, seed, tol)?)?,
        Command::Steervsnl { q } => render(&scenarios::steering_vs_nonlocality(q, tol)?)?,
        Command::Oneway { seed } => render(&scenarios::one_way(seed, tol)?)?,
        Command::Hidden { d } => render(&scenarios::hidden_steering(d, tol)?)?,
        Command::Detect { input, family, seed } => {
            let text = read_input(&input)?;
            let report = commands::detect(&text, family.as_deref(), seed, tol)
                .with_context(|| format!("detect {}", input.display()))?;
            render(&report)?
        }
        Command::Solve { input } => {
            let text = read_input(&input)?;
            let res = commands::solve_problem(&text, tol).with_context(|| format!("solve {}", input.display()))?;
            let rendered = render(&res)?;
            write_output(&rendered, out).context("writing output")?;
            return Ok(if res.status == SolveStatus::NumericFailure { 3 } else { 0 });
        }
    };
    write_output(&text, out).context("writing output")?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("STEERLAB_LOG")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
