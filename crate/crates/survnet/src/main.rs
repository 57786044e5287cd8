use clap::Parser;
use survnet::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("survnet: {e}");
        std::process::exit(e.exit_code());
    }
}
