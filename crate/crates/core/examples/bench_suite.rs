//! Runs the bundled benchmark suite at a small scale and prints the table
//! and the JSON records. Pass a suite directory to use another one.

use std::path::PathBuf;

use odfc::cli::{bench, BenchConfig};

fn main() {
    let suite = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench"));
    let cfg = BenchConfig {
        widths: vec![2, 4],
        scale: 5_000,
        ..BenchConfig::default()
    };
    let report = bench(&suite, &cfg).expect("suite runs");
    print!("{}", report.table());
    print!("{}", report.jsonl());
    if !report.all_ok() {
        std::process::exit(1);
    }
}
