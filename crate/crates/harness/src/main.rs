use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use bmv::cli::{execute, Cli};
use bmv::error::{ErrorKind, HarnessError};
use bmv::output::emit;

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("{}", e.line());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail(&HarnessError::new(ErrorKind::Usage, first));
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => return fail(&HarnessError::new(ErrorKind::Usage, e.to_string())),
    };
    let outcome = pool.install(|| execute(&cli).and_then(|o| emit(o, cli.format, cli.out_dir.as_deref())));
    match outcome {
        Ok((stdout, failed)) => {
            let _ = std::io::stdout().write_all(stdout.as_bytes());
            if failed {
                eprintln!("error[check]: one or more checks failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(&e),
    }
}
