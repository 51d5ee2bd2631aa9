use std::process::ExitCode;

use clap::Parser;

use cavity_cli::args::Cli;
use cavity_cli::commands;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(m) => {
            for f in &m.files {
                println!("wrote {} ({} bytes)", f.name, f.bytes);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
