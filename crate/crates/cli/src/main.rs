use std::io::Write as _;
use std::process::ExitCode;

use clap::Parser;
use sparx_cli::{cmd_check_equivalence, run, Cli, Command};

fn configure_threads() {
    let Ok(value) = std::env::var("SPARX_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: SPARX_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: SPARX_THREADS must be a positive integer, got '{value}'"),
    }
}

/// Print to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    // A failed equivalence check is a runtime failure, not just a report.
    if let Command::CheckEquivalence(args) = &cli.command {
        return match cmd_check_equivalence(args) {
            Ok(summary) => {
                emit(&summary.to_string());
                if summary.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    match run(cli) {
        Ok(text) => {
            emit(&text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
