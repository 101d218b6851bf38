use clap::Parser;
use pulsepair::run::{main_with, Cli};

fn main() {
    std::process::exit(main_with(Cli::parse()));
}
