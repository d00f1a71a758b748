use clap::Parser;
use netzm_cli::{run, Cli, FATAL};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => std::process::exit(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(FATAL);
        }
    }
}
