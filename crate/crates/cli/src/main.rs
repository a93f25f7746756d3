mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Exit status 2: bad flags, unreadable or malformed inputs.
const EXIT_ARGUMENT: u8 = 2;
/// Exit status 3: the estimation itself failed.
const EXIT_ESTIMATION: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(nntuck::Error),
}

impl Failure {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Failure::Core(nntuck::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    fn exit_code(&self) -> u8 {
        use nntuck::Error::*;
        match self {
            Failure::Usage(_) => EXIT_ARGUMENT,
            Failure::Core(Estimation(_) | Numerical { .. }) => EXIT_ESTIMATION,
            Failure::Core(_) => EXIT_ARGUMENT,
        }
    }
}

impl From<nntuck::Error> for Failure {
    fn from(e: nntuck::Error) -> Self {
        Failure::Core(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("NNTUCK_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("NNTUCK_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot start {threads} worker threads: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| commands::run(&cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
