//! One seeded blind session: the classifier answers for a simulated
//! participant after each melody is rendered over a lossy link.

use musinger::experiment::{build_session_plan, run_session, ClassifierAnswers, SessionConfig};
use musinger::model::{Condition, MelodyId};
use musinger::pipeline::{LoopbackPresenter, PipelineConfig};
use musinger::wire::LoopbackFaults;

fn main() {
    let seed = 11;
    let plan = build_session_plan(&MelodyId::ALL, 3, seed).unwrap();
    let config = PipelineConfig {
        faults: LoopbackFaults { loss: 0.05, duplicate: 0.0, jitter_ms: 20.0, base_delay_ms: 0.0 },
        ..PipelineConfig::default()
    };
    let mut presenter = LoopbackPresenter::new(config, seed);
    let mut answers = ClassifierAnswers::default();
    let outcome =
        run_session("sim", &plan, Condition::NoNoise, &mut presenter, &mut answers, &SessionConfig::default()).unwrap();
    for r in &outcome.records {
        println!("trial {:>2}: presented {} answered {} {}", r.trial_index, r.presented, r.answered, if r.correct() { "" } else { "x" });
    }
    let ok = outcome.records.iter().filter(|r| r.correct()).count();
    println!("{ok}/{} correct", outcome.records.len());
}
