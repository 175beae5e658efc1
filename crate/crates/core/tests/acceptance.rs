//! Acceptance suite. Runs every check at its stated tolerance and prints one
//! PASS/FAIL line each, then fails if any check failed. Positional arguments
//! filter checks by id or by a substring of the name, e.g.
//! `cargo test -p netmimo-core --test acceptance -- 3 determinism`.

use std::process::ExitCode;

use netmimo_core::acceptance::{name, run, ALL};
use netmimo_core::exec::Execution;

fn selected(id: u8, filters: &[String]) -> bool {
    filters.is_empty() || filters.iter().any(|f| f.parse::<u8>() == Ok(id) || name(id).contains(f.as_str()))
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let ids: Vec<u8> = ALL.iter().copied().filter(|&id| selected(id, &filters)).collect();
    println!("\nrunning {} acceptance checks", ids.len());
    let mut failed = Vec::new();
    for id in &ids {
        let report = run(*id, Execution::default());
        println!("{report}");
        if !report.passed {
            failed.push(*id);
        }
    }
    println!(
        "\nacceptance result: {} passed; {} failed{}",
        ids.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" (ids {failed:?})") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
