//! `harmlab`: one entry point for every computation, with JSON or CSV
//! reports.
//!
//! Exit status: 0 on success, 2 when a precondition fails, 3 when the finite
//! computation is inconclusive (truncation reached, too few samples, or an
//! undecided finite-radius check), 64 on a malformed invocation.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use harmlab::{Claim, Error, Report, Status};
use serde_json::json;

use args::{Cli, Format};
use commands::{Failure, Globals};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_INTERNAL: u8 = 70;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let globals = Globals { seed: cli.seed, threads: cli.threads };
    let name = commands::name(&cli.command);
    let (report, code) = match commands::run(&cli.command, &globals) {
        Ok(r) => {
            let code = if r.status == Status::Inconclusive { EXIT_INCONCLUSIVE } else { 0 };
            (r, code)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nRun with --help for usage.");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if !e.is_inconclusive() {
                let code = if matches!(e, Error::Invariant(_)) { EXIT_INTERNAL } else { EXIT_PRECONDITION };
                return ExitCode::from(code);
            }
            // Inconclusive outcomes still produce a report naming the radius.
            let config = commands::echo(&cli.command, cli.seed);
            let r = Report::new(name, config, &json!({ "error": e.to_string() }))
                .expect("reports serialize")
                .claim(Claim::exact("the computation stayed inside the loaded data", false))
                .inconclusive(commands::working_radius(&cli.command));
            (r, EXIT_INCONCLUSIVE)
        }
    };
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => match report.to_csv() {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INTERNAL);
            }
        },
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write the report: {e}");
        return ExitCode::from(EXIT_INTERNAL);
    }
    ExitCode::from(code)
}
