use std::path::PathBuf;
use std::process::ExitCode;

use barrier_compose::commands::{self, EXIT_CONFIG};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barrier-compose", version, about = "Composite barrier certificates and a QP safety filter for robot teams")]
struct Cli {
    /// Print only the final result line.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory.csv and summary.txt.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Audit that the scenario's certificate admits a bounded control at sampled in-set states.
    Check {
        scenario: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write validity.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference, QP-oracle and truth-table self checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every *.toml scenario in a directory, one output folder each.
    Sweep {
        dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn emit(quiet: bool, text: &str) {
    if quiet {
        if let Some(last) = text.lines().last() {
            println!("{last}");
        }
    } else {
        println!("{text}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, out } => commands::run_command(&scenario, &out).map(|r| {
            emit(cli.quiet, &r.render());
            r.exit_code()
        }),
        Command::Check { scenario, samples, seed, out } => {
            commands::check_command(&scenario, samples, seed, out.as_deref()).map(|r| {
                emit(cli.quiet, &r.render());
                r.exit_code()
            })
        }
        Command::Selftest { seed } => commands::selftest_command(seed).map(|r| {
            emit(cli.quiet, &r.render());
            r.exit_code()
        }),
        Command::Sweep { dir, out } => commands::sweep_command(&dir, &out).map(|entries| {
            for e in &entries {
                match &e.outcome {
                    Ok(r) => emit(cli.quiet, &r.render()),
                    Err(err) => eprintln!("{}: {err}", e.path.display()),
                }
            }
            commands::sweep_exit_code(&entries)
        }),
    };
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
