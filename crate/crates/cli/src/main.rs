use std::process::ExitCode;

use clap::Parser;
use pdp_cli::{execute, Cli, ExitKind};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(ExitKind::Config.code() as u8);
        }
        Err(e) => {
            // --help, --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli) {
        Ok(out) => {
            let m = &out.manifest;
            let report = json!({
                "command": m.job.name(),
                "headline": m.headline,
                "details": m.details,
                "outputs": m.outputs,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            match out.check_failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(ExitKind::Solver.code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
