use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match cavconc_cli::args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors, 0 for --help/--version
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match cavconc_cli::dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
