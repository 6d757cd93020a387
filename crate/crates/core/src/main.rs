use clap::Parser;
use shor_scaler::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("shor-scaler: {e}");
        std::process::exit(e.exit_code());
    }
}
