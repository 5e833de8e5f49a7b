use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use solicit::cli::{self, CliError, Command, Format, SeedArg};
use solicit::RunConfig;

/// Exact and simulated statistics for repeated solicitation campaigns.
#[derive(Debug, Parser)]
#[command(name = "solicit", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration. Optional for `verify`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the document here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Overrides the configured seed; `auto` draws one from the OS.
    #[arg(long)]
    seed: Option<SeedArg>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
            RunConfig::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        None if args.command == Command::Verify => Ok(RunConfig::default()),
        None => Err(CliError::Config("--config <path.json> is required".into())),
    }
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let config = load(args)?;
    let outcome = cli::run(args.command, &config, args.format, args.seed)?;
    match &args.output {
        Some(path) => std::fs::write(path, &outcome.document)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?,
        None => print!("{}", outcome.document),
    }
    Ok(outcome.success)
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Config(e.to_string())),
    };
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(&e),
    }
}
