mod args;
mod commands;
mod config;
mod error;
mod output;

use args::Cli;
use clap::error::ErrorKind;
use clap::Parser;
use error::CliError;
use std::ffi::OsString;

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

fn run(argv: Vec<OsString>) -> i32 {
    match dispatch(argv) {
        Ok(()) => 0,
        Err(e) => {
            if let CliError::Usage { text, .. } = &e {
                eprint!("{text}");
            }
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RINGWAVE_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                error::invalid(format!("RINGWAVE_THREADS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(error::invalid("threads must be at least 1"));
    }
    Ok(n)
}

fn dispatch(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = config::merge(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{}", e.render());
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let message = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                "no subcommand given".to_string()
            } else {
                text.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()
            };
            return Err(CliError::Usage { text, message });
        }
    };
    let threads = threads(cli.threads)?;
    if let Some(n) = threads {
        ringwave::exec::init_threads(n);
    }

    let mut config = match &cli.command {
        args::Command::KernelTable(a) => serde_json::to_value(a)?,
        args::Command::Stream(a) => serde_json::to_value(a)?,
        args::Command::Functionals(a) => serde_json::to_value(a)?,
        args::Command::Rearrange(a) => serde_json::to_value(a)?,
        args::Command::Ring(a) => serde_json::to_value(a)?,
        args::Command::Evolve(a) => serde_json::to_value(a)?,
        args::Command::Verify(a) => serde_json::to_value(a)?,
    };
    if let Some(m) = config.as_object_mut() {
        m.insert("threads".into(), serde_json::json!(threads));
        m.insert("csv".into(), serde_json::json!(cli.csv));
    }
    let ctx = commands::Ctx { config, csv: cli.csv };
    commands::run(&cli.command, &ctx)
}
