//! Command-line front end: model grammar, run configuration, the estimation
//! pipeline and report rendering.

pub mod config;
pub mod error;
pub mod grammar;
pub mod report;
pub mod run;

use std::ffi::OsString;

use clap::Parser;

pub use config::{Cli, Command, Format, RunConfig};
pub use error::{CliError, CliResult};
pub use grammar::parse_model;
pub use report::{render, Report};
pub use run::run;

/// Size the worker pool from `HDSELECT_THREADS` when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HDSELECT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HDSELECT_THREADS must be a positive integer, got {v:?}")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run the report for `config` and deliver it to `--out` or stdout.
pub fn execute(config: &RunConfig) -> CliResult<Report> {
    let report = run(config)?;
    let text = render(&report, config.format);
    match &config.out {
        Some(path) => report::write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(report)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| execute(&cli.command.into_config()));
    match result {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.module());
            e.exit_code()
        }
    }
}
