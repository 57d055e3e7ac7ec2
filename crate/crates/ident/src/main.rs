use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args = ident::cli::Cli::parse();
    match ident::cli::execute(args) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
