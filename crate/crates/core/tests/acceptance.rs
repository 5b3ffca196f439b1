//! The eleven acceptance checks, one pass/fail line each.
//!
//! Runs without the libtest harness so the lines always reach stdout; the
//! process exits nonzero if any check fails or errors.

use std::process::ExitCode;
use std::time::Instant;

use onebit::verify::{run_criterion, VerifyOptions, CRITERIA};

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut failed = 0;
    for id in 1..=CRITERIA {
        let start = Instant::now();
        match run_criterion(id, &opts) {
            Ok(o) => {
                println!("{}  ({:.1} s)", o.line(), start.elapsed().as_secs_f64());
                for d in &o.details {
                    println!("       {d}");
                }
                if !o.passed {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("[FAIL] {id:>2} error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {}/{CRITERIA} passed", CRITERIA - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
