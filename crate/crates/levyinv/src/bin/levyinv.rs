use clap::Parser;
use levyinv::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
