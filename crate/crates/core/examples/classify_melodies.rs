//! Prints each bundled melody's interval signature and its DTW distance to
//! every template, then classifies a tempo-shifted copy.

use musinger::melody::{builtin_melody, ioi_signature, Classifier};
use musinger::model::MelodyId;

fn main() {
    let classifier = Classifier::builtin();
    for id in MelodyId::ALL {
        let m = builtin_melody(id);
        let sig = ioi_signature(&m).unwrap();
        let head: Vec<String> = sig.values().iter().take(6).map(|v| format!("{v:.3}")).collect();
        let dist: Vec<String> = classifier
            .distances(&m, &MelodyId::ALL)
            .unwrap()
            .iter()
            .map(|(t, d)| format!("{t}={d:.4}"))
            .collect();
        println!("{id}: ioi [{} ..]  dtw {}", head.join(" "), dist.join(" "));
    }
    let slow = builtin_melody(MelodyId::C).scale_tempo(1.2);
    println!("C at 1.2x duration -> {}", classifier.classify(&slow, &MelodyId::ALL).unwrap());
}
