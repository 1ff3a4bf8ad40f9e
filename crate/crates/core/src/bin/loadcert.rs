use clap::Parser;

use loadcert::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
