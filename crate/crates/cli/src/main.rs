use clap::Parser;
use hdqkd::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("hdqkd: {e}");
        std::process::exit(e.exit_code());
    }
}
