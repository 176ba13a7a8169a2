mod args;
mod campaign;
mod config;
mod data;
mod output;
mod reproduce;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use campaign::Cell;
use output::{usage, OutDir, UsageError};

/// Settings shared by every command.
pub struct Ctx {
    /// Seed given on the command line; overrides a config file's seed.
    pub cli_seed: Option<u64>,
    /// Seed used when neither the command line nor a config sets one.
    pub seed: u64,
    pub out: OutDir,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("SEQBREAK_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("SEQBREAK_SEED must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        cli_seed: cli.seed,
        seed: match cli.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        },
        out: OutDir::new(&cli.out_dir),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Monitor(a) => data::monitor(a, &ctx.out),
        Command::Fit(a) => data::fit(a, &ctx.out),
        Command::GarchFit(a) => data::garch(a, &ctx.out),
        Command::Retro(a) => data::retro(a, &ctx.out),
        Command::SimulateCriticalValues(a) => campaign::critical_values(a, &ctx),
        Command::McSize(a) => campaign::single_cell(a, &ctx, Cell::Size),
        Command::McPower(a) => campaign::single_cell(a, &ctx, Cell::Power),
        Command::McArl(a) => campaign::single_cell(a, &ctx, Cell::Arl),
        Command::McCurve(a) => campaign::curve(a, &ctx),
        Command::Reproduce(a) => reproduce::run(a, &ctx),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
