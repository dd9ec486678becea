#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod compare;
mod config;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flatlab_core::Exec;

/// Errors carry their exit code: 2 for bad input, 3 for numerical failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numeric error in {op}: {detail}")]
    Numeric { op: String, detail: String },
}

impl CliError {
    pub fn from_core(e: flatlab_core::Error, path: &std::path::Path) -> Self {
        match e {
            flatlab_core::Error::Parse { line, detail } => CliError::Input(format!("{}:{line}: {detail}", path.display())),
            other => other.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }
}

impl From<flatlab_core::Error> for CliError {
    fn from(e: flatlab_core::Error) -> Self {
        match e {
            flatlab_core::Error::Numeric { op, detail } => CliError::Numeric {
                op: op.to_string(),
                detail,
            },
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "flatlab", version, about = "Run weighted interpolation experiments from scenario files")]
struct Cli {
    /// Worker threads; the FLATLAB_JOBS environment variable takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in the scenario file.
    Run { config: PathBuf },
    /// Run the scenario's [sweep] table.
    Sweep { config: PathBuf },
    /// Compare the reports of two run directories.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Allowed difference, relative to max(1, |a|, |b|).
        #[arg(long)]
        tol: f64,
    },
}

fn jobs(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match std::env::var("FLATLAB_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("FLATLAB_JOBS must be a positive integer, got `{v}`")))?,
        Err(_) => flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(CliError::Input("the number of jobs must be positive".into()));
    }
    Ok(n)
}

fn setup_pool(jobs: usize) -> Exec {
    #[cfg(feature = "parallel")]
    {
        // fails only if a global pool already exists, in which case that pool is used
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        if jobs > 1 {
            return Exec::Parallel;
        }
    }
    let _ = jobs;
    Exec::Sequential
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = jobs(cli.jobs).and_then(|jobs| {
        let exec = setup_pool(jobs);
        match cli.command {
            Command::Run { config } => runner::run(&config, false, exec, jobs).map(|dir| {
                println!("{}", dir.display());
                0
            }),
            Command::Sweep { config } => runner::run(&config, true, exec, jobs).map(|dir| {
                println!("{}", dir.display());
                0
            }),
            Command::Compare { dir_a, dir_b, tol } => compare::compare(&dir_a, &dir_b, tol),
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("flatlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
