use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nctransport_cli::{run, write_outputs, CliError, Command, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "nctransport", version, about = "Free monotone transport in truncated noncommutative power series")]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `command` from the configuration.
    #[arg(long, value_enum)]
    command: Option<Command>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even if the contractivity conditions fail; results are marked uncertified.
    #[arg(long)]
    override_conditions: bool,
}

fn main_inner(args: Args) -> Result<bool, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    cfg.override_conditions |= args.override_conditions;
    let command = args
        .command
        .or(cfg.command)
        .ok_or_else(|| CliError::Config("no command given (use --command or `command = ...`)".into()))?;
    cfg.command = Some(command);
    let outcome = run(&cfg, command)?;
    write_outputs(&cfg, &outcome)?;
    if let Some(reason) = &outcome.failure {
        eprintln!("{}: {reason}", command.name());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
