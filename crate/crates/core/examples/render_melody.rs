//! Streams a bundled melody through the full loopback pipeline and draws
//! which linkage touches the skin on each 50 ms step.

use musinger::melody::builtin_melody;
use musinger::model::MelodyId;
use musinger::pipeline::{run_loopback, PipelineConfig};

fn main() {
    let id = std::env::args().nth(1).and_then(|s| s.parse::<MelodyId>().ok()).unwrap_or(MelodyId::B);
    let melody = builtin_melody(id);
    let report = run_loopback(&melody, &PipelineConfig::default(), 0).unwrap();
    println!("{} ({}): {} onsets in, {} rendered", id, id.title(), melody.len(), report.onsets.len());
    for ch in 0..3 {
        let line: String = report
            .history
            .ticks
            .iter()
            .step_by(5)
            .map(|states| if states[ch].in_contact { '#' } else { '.' })
            .collect();
        println!("ch{} {line}", ch + 1);
    }
}
