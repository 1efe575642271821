//! Benchmarks every bundled scenario once and prints the summary table.

use std::path::Path;

use boundplan::scenario::{bench, format_table};

fn main() -> boundplan::error::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<_> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let report = bench(&files, reps, None)?;
    print!("{}", format_table(&report));
    let unexpected: usize = report.scenarios.iter().map(|s| s.unexpected_failures()).sum();
    println!("unexpected failures: {unexpected}");
    Ok(())
}
