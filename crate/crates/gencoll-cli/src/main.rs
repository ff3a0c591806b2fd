use clap::Parser;

use gencoll_cli::{run, Cli};

fn main() {
    let echo: String = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let cli = Cli::parse();
    match run(&cli.command, &echo) {
        Ok(report) => println!("{}", report.render()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
