use clap::Parser;

use clonesim::cli::{self, Cli};

fn main() {
    let cli = Cli::parse();
    match cli::execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
