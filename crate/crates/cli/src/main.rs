mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, Resolved, RunConfig};
use crate::error::CliError;

/// Null-cone parametrix evaluation and convergence verification.
#[derive(Parser, Debug)]
#[command(name = "nullkirch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `jobs`.
    #[arg(long, global = true, env = "NULLKIRCH_THREADS")]
    jobs: Option<usize>,
    /// Ladder rung for the single-case commands; overrides `rung`.
    #[arg(long, global = true)]
    rung: Option<usize>,
    /// Case for the single-case commands; overrides `case`.
    #[arg(long, global = true)]
    case: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dump the cone grid and optical scalars.
    Cone,
    /// Dump the cone, optical scalars and transport kernel.
    Transport,
    /// Full parametrix breakdown for one case at one rung.
    Evaluate,
    /// Run the ladder of every case and judge its claims.
    Verify,
}

fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    RunConfig::load(path)?.resolve(Overrides {
        out: cli.out.clone(),
        jobs: cli.jobs,
        rung: cli.rung,
        case: cli.case.clone(),
    })
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Cone => commands::cmd_cone(&cfg, false),
        Command::Transport => commands::cmd_cone(&cfg, true),
        Command::Evaluate => commands::cmd_evaluate(&cfg),
        Command::Verify => commands::cmd_verify(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::Verification(summary)) => {
            print!("{summary}");
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("nullkirch: {e}");
            e.exit_code()
        }
    }
}
