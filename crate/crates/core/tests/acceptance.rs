//! Runs the full acceptance suite and prints one line per criterion.
//! Exits non-zero if any criterion fails.

use std::io::Write;
use std::process::ExitCode;

use holder_lab::verification::{criteria, DEFAULT_SEED};

fn main() -> ExitCode {
    let seed = std::env::var("HWL_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);
    // HWL_ONLY=1,12 restricts the run to the listed criteria
    let only: Option<Vec<u32>> =
        std::env::var("HWL_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let outcomes: Vec<_> = criteria()
        .iter()
        .filter(|c| only.as_ref().is_none_or(|ids| ids.contains(&c.id)))
        .map(|c| {
            let o = c.evaluate(seed);
            let _ = writeln!(std::io::stderr().lock(), "{}", o.line());
            o
        })
        .collect();
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("acceptance: {} passed, {} failed {:?}", outcomes.len() - failed.len(), failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
