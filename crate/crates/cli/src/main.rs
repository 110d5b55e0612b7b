use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use mzfisher::{run, Cli, CliError};

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        for (path, text) in &out.files {
            write_file(path, text)?;
        }
        match &out.output {
            Some(path) => write_file(path, &out.body)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                // a closed pipe is not worth a failure exit
                let _ = stdout.write_all(out.body.as_bytes());
            }
        }
        for note in &out.notes {
            eprintln!("{note}");
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mzfisher: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
