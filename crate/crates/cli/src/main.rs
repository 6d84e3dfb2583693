use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use fmix_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Some(text) = outcome.stdout {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            for path in outcome.written {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("fmix: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
