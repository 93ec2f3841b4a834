use std::process::ExitCode;

use clap::Parser;
use simforge_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .with_max_level(cli.log_level)
        .init();
    match execute(cli.command) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.output).expect("report serializes"));
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
