//! Benchmark melodies, the MRF1 rhythm file format and a rhythm classifier.

mod classify;
mod mrf;

pub use classify::{classify_melody, dtw_distance, ioi_signature, Classifier, IoiSignature};
pub use mrf::{parse_rhythm_file, serialize_rhythm};

use thiserror::Error;

pub use crate::model::MelodyId;
use crate::model::RhythmPattern;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MelodyError {
    #[error("line {line}: not an MRF1 file")]
    BadFormat { line: usize },
    #[error("line {line}: channel {value} outside 1..3")]
    BadChannel { line: usize, value: String },
    #[error("line {line}: time goes backwards")]
    BadOrder { line: usize },
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("pattern needs at least 3 distinct onset times, found {found}")]
    TooShort { found: usize },
    #[error("no candidate melodies given")]
    NoCandidates,
}

impl MelodyError {
    /// Line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            MelodyError::BadFormat { line }
            | MelodyError::BadChannel { line, .. }
            | MelodyError::BadOrder { line }
            | MelodyError::BadLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

const ASSETS: [(MelodyId, &str); 4] = [
    (MelodyId::A, include_str!("../../assets/melody_a.mrf")),
    (MelodyId::B, include_str!("../../assets/melody_b.mrf")),
    (MelodyId::C, include_str!("../../assets/melody_c.mrf")),
    (MelodyId::D, include_str!("../../assets/melody_d.mrf")),
];

/// Raw MRF1 text of a bundled melody.
pub fn builtin_asset(id: MelodyId) -> &'static str {
    ASSETS[id.index()].1
}

/// The bundled transcription of a benchmark melody.
pub fn builtin_melody(id: MelodyId) -> RhythmPattern {
    let mut pattern =
        parse_rhythm_file(builtin_asset(id)).expect("bundled melody assets are valid MRF1");
    pattern.melody_id = Some(id);
    pattern
}

#[cfg(test)]
mod tests {
    use super::*;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    fn iois(p: &RhythmPattern) -> Vec<f64> {
        p.onsets
            .windows(2)
            .map(|w| w[1].time_ms - w[0].time_ms)
            .filter(|&d| d > 0.0)
            .collect()
    }

    #[test]
    fn every_builtin_is_valid() {
        for id in MelodyId::ALL {
            let p = builtin_melody(id);
            assert_eq!(p.melody_id, Some(id));
            assert!(p.validate().is_ok());
            assert!((8..=32).contains(&p.len()), "{id}: {} onsets", p.len());
            let end_s = p.end_ms() / 1000.0;
            assert!((4.0..=12.0).contains(&end_s), "{id}: {end_s} s");
            assert!(p.onsets.iter().all(|o| (1..=3).contains(&o.channel.number())));
        }
    }

    #[test]
    fn galop_is_faster_than_birthday() {
        let d = median(iois(&builtin_melody(MelodyId::D)));
        let b = median(iois(&builtin_melody(MelodyId::B)));
        assert_eq!(d, 125.0);
        assert_eq!(b, 600.0);
        assert!(d < b);
    }

    #[test]
    fn melodies_use_all_channels() {
        for id in MelodyId::ALL {
            let p = builtin_melody(id);
            for n in 1..=3 {
                assert!(p.onsets.iter().any(|o| o.channel.number() == n), "{id} ch{n}");
            }
        }
    }
}
