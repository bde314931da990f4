use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use phaseconj_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = execute(&cli);
    let report = run.report.to_json();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    if let Some(text) = &run.stdout {
        let _ = stdout.write_all(text.as_bytes());
    }
    if let Some(err) = &run.report.error {
        let _ = writeln!(stderr, "error: {err}");
    }
    for w in &run.report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if cli.report.is_none() {
        // keep stdout parseable when it already carries the primary output
        if run.stdout.is_some() {
            let _ = writeln!(stderr, "{report}");
        } else {
            let _ = writeln!(stdout, "{report}");
        }
    }
    ExitCode::from(run.report.exit_code() as u8)
}
