use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod output;
mod scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("trivial regime: {rule} ({})", .diagnostics.join("; "))]
    Trivial {
        rule: wolffkit::TrivialRule,
        diagnostics: Vec<String>,
    },
    #[error(transparent)]
    Core(#[from] wolffkit::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Parser)]
#[command(name = "wolffkit", version, about = "Wolff potentials, sublinear solvers and their inequalities")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "WOLFFKIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory, overriding the scenario's.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a potential of the scenario measure at a point set.
    Potential(Common),
    /// Run the monotone iteration.
    Solve(Common),
    /// Run the seeded inequality checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// One check name, or "all".
        #[arg(long)]
        check: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Validate the parameters and print every derived exponent.
    Exponents(Common),
    /// Build a manufactured problem with a known solution.
    Manufacture(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Potential(c) => commands::run("potential", &c.scenario, c.output, commands::potential),
        Command::Solve(c) => commands::run("solve", &c.scenario, c.output, commands::solve),
        Command::Exponents(c) => commands::run("exponents", &c.scenario, c.output, commands::exponents),
        Command::Manufacture(c) => commands::run("manufacture", &c.scenario, c.output, commands::manufacture),
        Command::Verify { common, check, seed, points, trials } => {
            let ov = commands::VerifyOverrides { check, seed, points, trials };
            commands::run("verify", &common.scenario, common.output, |s| commands::verify(s, &ov))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
