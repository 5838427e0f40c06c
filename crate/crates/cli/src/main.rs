mod args;
mod commands;
mod error;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a, cli.human),
        Command::Run(a) => commands::run(a, cli.human),
        Command::SimulateCache(a) => commands::simulate_cache(a, cli.human),
        Command::Stats(a) => commands::stats(a, cli.human),
    };
    match result {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
