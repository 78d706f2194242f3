use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pathlab::config::parse_config_with_overrides;
use pathlab::run::{execute, ExitStatus};

#[derive(Parser)]
#[command(name = "pathlab", version, about = "Lattice path-integral experiments for the deformed double well")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Config document; `{}` is assumed when omitted.
        config: Option<PathBuf>,
        /// Override a config entry, e.g. `--set sampler.seed=7`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Cmd::Run { config, overrides } = cli.command;

    let text = match &config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(&format!("cannot read {}: {e}", path.display())),
        },
        None => "{}".to_string(),
    };
    let spec = match parse_config_with_overrides(&text, &overrides) {
        Ok(s) => s,
        Err(e) => return fail(&e.to_string()),
    };
    match execute(&spec) {
        Ok(outcome) => {
            if let Some(reason) = &outcome.failure {
                eprintln!("experiment failed: {reason}");
            }
            println!("{}", outcome.output.display());
            println!("{}", outcome.metadata.display());
            println!("{}", if outcome.passed { "PASS" } else { "FAIL" });
            ExitCode::from(outcome.status().code() as u8)
        }
        Err(e) => fail(&e.to_string()),
    }
}

fn fail(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(ExitStatus::OperationalError.code() as u8)
}
