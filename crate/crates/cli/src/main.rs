mod args;
mod commands;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, CommonArgs};
use table::Table;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(flatqed::Error),
    Io(io::Error),
}

impl CliError {
    fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "InvalidParameter",
            CliError::Lib(e) => e.name(),
            CliError::Io(_) => "Io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if !e.is_config() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<flatqed::Error> for CliError {
    fn from(e: flatqed::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn init_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FLATQED_WORKERS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FLATQED_WORKERS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

fn emit(table: &Table, common: &CommonArgs) -> Result<(), CliError> {
    match &common.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(&mut w, common.format)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, common.format)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_workers()?;
    let (table, common) = match &cli.command {
        Command::Bands(a) => (commands::bands(a)?, &a.common),
        Command::Boundstate(a) => (commands::boundstate(a)?, &a.common),
        Command::Loclen(a) => (commands::loclen(a)?, &a.common),
        Command::Xi(a) => (commands::xi(a)?, &a.common),
        Command::Interactions(a) => (commands::interactions(a)?, &a.common),
        Command::Giants(a) => (commands::giants(a)?, &a.common),
        Command::Dynamics(a) => (commands::dynamics(a)?, &a.common),
        Command::Disorder(a) => (commands::disorder(a)?, &a.common),
    };
    emit(&table, common)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match args::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            return ExitCode::from(e.exit_code());
        }
    };
    // clap exits with status 2 on usage errors
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
