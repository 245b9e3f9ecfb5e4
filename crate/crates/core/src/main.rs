use clap::Parser;

use monotone_mv::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
