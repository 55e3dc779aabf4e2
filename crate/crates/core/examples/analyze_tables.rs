//! Analyzes a trial log (default: the bundled two-condition fixture) and
//! prints the full text report.

use std::fs::File;

use musinger::experiment::{read_trial_log, AnalysisReport};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/both_conditions.csv").to_string());
    let records = read_trial_log(File::open(&path).unwrap()).unwrap();
    print!("{}", AnalysisReport::from_records(&records).unwrap());
}
