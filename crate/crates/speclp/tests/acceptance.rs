//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure. Runs without the libtest harness so the lines always show.

use std::process::ExitCode;

use speclp::acceptance::run_all;

fn main() -> ExitCode {
    println!("running acceptance suite");
    let results = run_all(&mut |r| println!("{}", r.line()));
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass()).map(|r| r.id).collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
