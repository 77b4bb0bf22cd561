//! `ppde`: run the path-dependent PDE scheme from a JSON config.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "ppde", version, about = "Solve and audit path-dependent PDEs from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for u^h at the origin and print the result as JSON.
    Solve(Common),
    /// Audit the monotonicity conditions over sampled points.
    Check {
        #[command(flatten)]
        common: Common,
        /// Search for passing mu and sigma instead of auditing the configured ones.
        #[arg(long)]
        suggest: bool,
    },
    /// Error against the closed form over `run.n_list`.
    Converge(Common),
    /// Consistency residuals of a test functional over `run.h_list`.
    Consistency(Common),
}

#[derive(Args)]
struct Common {
    /// Config file, or `-` for stdin.
    #[arg(long, value_name = "PATH|-")]
    config: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "csv|json")]
    format: Option<String>,
    #[arg(long, value_name = "N")]
    budget: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            n: self.n,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format.clone(),
            budget: self.budget,
        });
        Ok(cfg)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PPDE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config("PPDE_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::internal)
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve(c) => commands::cmd_solve(&c.load()?),
        Command::Check { common, suggest } => commands::cmd_check(&common.load()?, suggest),
        Command::Converge(c) => commands::cmd_converge(&c.load()?),
        Command::Consistency(c) => commands::cmd_consistency(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&msg).trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
