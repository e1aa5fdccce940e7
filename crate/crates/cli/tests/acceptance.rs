//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::process::ExitCode;

use delaypo_cli::verify::{checks, run_check, VerifyOptions};

const CRITERIA: [(u32, &str); 11] = [
    (1, "estimator-mean"),
    (2, "value-difference"),
    (3, "hedge-bounds"),
    (4, "delay-indicator"),
    (5, "ratio-invariant"),
    (6, "magnitude-bounds"),
    (7, "confidence-sandwich"),
    (8, "box-simplex"),
    (9, "resampling"),
    (10, "zero-delay"),
    (11, "sublinearity"),
];

fn main() -> ExitCode {
    let all = checks();
    let options = VerifyOptions::default();
    let mut failed = 0;
    for (number, name) in CRITERIA {
        let check = all.iter().find(|c| c.name == name).expect("criterion check is registered");
        let result = run_check(check, &options);
        let status = if result.passed { "PASS" } else { "FAIL" };
        println!("criterion {number:>2} [{name}] {status} ({:.2}s): {}", result.seconds, result.detail);
        if !result.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
