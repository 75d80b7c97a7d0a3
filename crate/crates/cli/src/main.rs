//! `msapdm`: synthesise data, train, evaluate, benchmark and ablate
//! MSAP-DM activity recognition models.

mod args;
mod commands;
mod error;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use manifest::RunManifest;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut manifest = RunManifest::start(cli.command.name());
    let result = commands::run(&cli, &mut manifest);
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    if let Err(e) = manifest.finish(cli.manifest.as_deref(), &result) {
        eprintln!("error: could not write run manifest: {e}");
        return ExitCode::from(if code == 0 { 2 } else { code });
    }
    ExitCode::from(code)
}
