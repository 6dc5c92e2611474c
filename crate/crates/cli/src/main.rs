use clap::Parser;

use resus_gne_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let code = execute(&cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
