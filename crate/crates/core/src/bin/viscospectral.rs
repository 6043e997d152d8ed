use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use viscospectral::config::{error_json, execute, exit_code, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Spectrum,
    Solve,
    Oracle,
    Compare,
    Estimates,
    Stability,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Solve => Command::Solve,
            Cmd::Oracle => Command::Oracle,
            Cmd::Compare => Command::Compare,
            Cmd::Estimates => Command::Estimates,
            Cmd::Stability => Command::Stability,
        }
    }
}

/// Spectra, residue-series solutions and estimate checks for viscoelastic
/// wave problems with exponential-sum memory.
#[derive(Debug, Parser)]
#[command(name = "viscospectral", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Problem description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Also write the full per-mode oracle state traces.
    #[arg(long)]
    dump_state: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": "UsageError",
                "message": e.to_string().trim_end(),
                "exit_code": 1,
            });
            eprintln!("{record}");
            return ExitCode::from(1);
        }
    };
    match execute(cli.command.into(), &cli.config, &cli.out, cli.dump_state) {
        Ok(outcome) => {
            println!("{}", outcome.stdout);
            if outcome.assertion_failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
