mod config;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use telesim::experiment::run_scenario;
use telesim::oracle::{verify_all, verify_scenario, MAX_ORACLE_PAIRS};

use config::{resolve, Cli, Format};

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("telesim: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            return fail(line.trim_start_matches("error: "));
        }
    };
    let run = match resolve(&cli) {
        Ok(run) => run,
        Err(msg) => return fail(msg),
    };
    let report = match run_scenario(&run.scenario) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };

    let checks = if run.verify {
        let mut checks = Vec::new();
        if run.scenario.params.max_pairs <= MAX_ORACLE_PAIRS {
            match verify_scenario(&run.scenario) {
                Ok(c) => checks.extend(c),
                Err(e) => return fail(e),
            }
        }
        match verify_all(run.scenario.seed) {
            Ok(c) => checks.extend(c),
            Err(e) => return fail(e),
        }
        Some(checks)
    } else {
        None
    };

    let text = match run.format {
        Format::Table => report::table(&report, checks.as_deref()),
        Format::Json => report::json(&report, checks.as_deref()),
        Format::Csv => report::csv(&report),
    };
    print!("{text}");

    match checks {
        Some(c) if c.iter().any(|c| !c.passed) => {
            eprintln!("telesim: sparse engine and oracle disagree");
            ExitCode::from(1)
        }
        _ => ExitCode::SUCCESS,
    }
}
