//! Command-line front end: runs, sweeps, trajectory estimates and
//! verification reports. The binary is a thin wrapper over [`dispatch`].

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

use std::io::Write;

use args::{Command, OutputArgs};
use error::{CliError, CliResult};

fn emit(output: &OutputArgs, body: &str) -> CliResult<()> {
    match &output.out {
        Some(path) => std::fs::write(path, body)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Execute one subcommand, writing its report. Verification failures are
/// returned as an error after the report has been written.
pub fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Run(a) => emit(&a.output, &commands::cmd_run(a)?),
        Command::Sweep(a) => emit(&a.output, &commands::cmd_sweep(a)?),
        Command::Trajectories(a) => emit(&a.output, &commands::cmd_trajectories(a)?),
        Command::Verify(a) => {
            let (json, report) = commands::cmd_verify(a)?;
            emit(&a.output, &json)?;
            eprint!("{}", report.summary());
            match report.failures {
                0 => Ok(()),
                n => Err(CliError::VerificationFailed(n)),
            }
        }
    }
}
