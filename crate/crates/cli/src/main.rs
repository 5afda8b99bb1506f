//! `mtscene`: synthetic data, network inference, instance decoding,
//! panoptic merging, evaluation and reporting over file artifacts.

use std::process::ExitCode;

use clap::{Args, FromArgMatches};

mod commands;
mod config;
mod error;
mod layout;

use commands::{registry, Context};
use config::{Flags, RunConfig};
use error::CliError;

fn cli() -> clap::Command {
    let mut app = clap::Command::new("mtscene")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Multi-task RGB-D scene analysis toolkit")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in registry() {
        app = app.subcommand(Flags::augment_args(clap::Command::new(cmd.name())).about(cmd.about()));
    }
    app
}

fn run() -> Result<(), CliError> {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = commands::find(name).ok_or_else(|| CliError::Validation(format!("unknown subcommand '{name}'")))?;
    let flags = Flags::from_arg_matches(sub).map_err(|e| CliError::Validation(e.to_string()))?;
    let cfg = RunConfig::from_flags(&flags)?;
    let spectrum = cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.into()))?;
    let ctx = Context { cfg, spectrum };
    pool.install(|| command.run(&ctx))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(msg) => eprintln!("error: {msg}"),
                CliError::Runtime(err) => eprintln!("error: {err:#}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
