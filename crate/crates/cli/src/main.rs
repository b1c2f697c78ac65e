use std::process::ExitCode;

use clap::Parser;
use stem_cli::{execute, Cli, InputError};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            let input = err.chain().any(|e| e.is::<InputError>());
            ExitCode::from(if input { 2 } else { 3 })
        }
    }
}
