use clap::Parser;
use projprolong_cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
