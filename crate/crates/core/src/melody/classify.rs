//! Tempo-invariant rhythm matching on normalized inter-onset intervals.

use super::{builtin_melody, MelodyError};
use crate::model::{MelodyId, RhythmPattern};

/// Onsets closer than this are one rhythmic event (e.g. a chord across channels).
const SAME_TIME_MS: f64 = 1e-6;

/// Inter-onset intervals divided by their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct IoiSignature(Vec<f64>);

impl IoiSignature {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn ioi_signature(pattern: &RhythmPattern) -> Result<IoiSignature, MelodyError> {
    let mut times: Vec<f64> = pattern.onsets.iter().map(|o| o.time_ms).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|b, a| *b - *a <= SAME_TIME_MS);
    if times.len() < 3 {
        return Err(MelodyError::TooShort { found: times.len() });
    }
    let span = times[times.len() - 1] - times[0];
    Ok(IoiSignature(
        times.windows(2).map(|w| (w[1] - w[0]) / span).collect(),
    ))
}

/// Dynamic time warping with squared-difference local cost.
///
/// Squaring keeps small timing noise small relative to structural differences.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            let diff = x - b[j - 1];
            cur[j] = diff * diff + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Nearest-template classifier. Ties go to the alphabetically first melody.
#[derive(Debug, Clone)]
pub struct Classifier {
    templates: Vec<(MelodyId, IoiSignature)>,
}

impl Classifier {
    pub fn builtin() -> Self {
        Self::from_patterns(MelodyId::ALL.map(|id| (id, builtin_melody(id))))
            .expect("bundled melodies have enough onsets")
    }

    pub fn from_patterns(
        patterns: impl IntoIterator<Item = (MelodyId, RhythmPattern)>,
    ) -> Result<Self, MelodyError> {
        let mut templates = patterns
            .into_iter()
            .map(|(id, p)| ioi_signature(&p).map(|s| (id, s)))
            .collect::<Result<Vec<_>, _>>()?;
        templates.sort_by_key(|(id, _)| *id);
        templates.dedup_by_key(|(id, _)| *id);
        Ok(Classifier { templates })
    }

    /// Distance to every candidate that has a template, in id order.
    pub fn distances(
        &self,
        pattern: &RhythmPattern,
        candidates: &[MelodyId],
    ) -> Result<Vec<(MelodyId, f64)>, MelodyError> {
        let sig = ioi_signature(pattern)?;
        Ok(self
            .templates
            .iter()
            .filter(|(id, _)| candidates.contains(id))
            .map(|(id, t)| (*id, dtw_distance(sig.values(), t.values())))
            .collect())
    }

    pub fn classify(
        &self,
        pattern: &RhythmPattern,
        candidates: &[MelodyId],
    ) -> Result<MelodyId, MelodyError> {
        let mut best: Option<(MelodyId, f64)> = None;
        for (id, d) in self.distances(pattern, candidates)? {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
        best.map(|(id, _)| id).ok_or(MelodyError::NoCandidates)
    }
}

pub fn classify_melody(
    pattern: &RhythmPattern,
    candidates: &[MelodyId],
) -> Result<MelodyId, MelodyError> {
    Classifier::builtin().classify(pattern, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channel, Onset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at(times: &[f64]) -> RhythmPattern {
        let ch = Channel::from_number(1).unwrap();
        RhythmPattern::new(None, times.iter().map(|&t| Onset::new(t, ch, 10.0, 1.0)).collect())
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn signature_examples() {
        assert!(close(ioi_signature(&at(&[0.0, 500.0, 1000.0])).unwrap().values(), &[0.5, 0.5]));
        assert!(close(
            ioi_signature(&at(&[0.0, 100.0, 300.0])).unwrap().values(),
            &[1.0 / 3.0, 2.0 / 3.0]
        ));
    }

    #[test]
    fn simultaneous_onsets_count_once() {
        let ch2 = Channel::from_number(2).unwrap();
        let mut p = at(&[0.0, 100.0, 300.0]);
        p.onsets.insert(1, Onset::new(0.0, ch2, 10.0, 1.0));
        assert!(close(ioi_signature(&p).unwrap().values(), &[1.0 / 3.0, 2.0 / 3.0]));
        assert_eq!(
            ioi_signature(&at(&[0.0, 0.0, 50.0])),
            Err(MelodyError::TooShort { found: 2 })
        );
    }

    #[test]
    fn dtw_by_hand() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        // [1,2] vs [1,1,2]: warp the first 1 twice
        assert_eq!(dtw_distance(&[1.0, 2.0], &[1.0, 1.0, 2.0]), 0.0);
        assert_eq!(dtw_distance(&[0.0], &[1.0, 2.0]), 5.0);
        assert_eq!(dtw_distance(&[], &[1.0]), f64::INFINITY);
    }

    #[test]
    fn self_classification() {
        let c = Classifier::builtin();
        for id in MelodyId::ALL {
            assert_eq!(c.classify(&builtin_melody(id).anonymized(), &MelodyId::ALL).unwrap(), id);
        }
    }

    #[test]
    fn tempo_invariance() {
        let c = Classifier::builtin();
        for id in MelodyId::ALL {
            for k in [0.8, 0.9, 1.0, 1.1, 1.25] {
                let p = builtin_melody(id).scale_tempo(k).anonymized();
                assert_eq!(c.classify(&p, &MelodyId::ALL).unwrap(), id, "{id} x{k}");
            }
        }
    }

    #[test]
    fn survives_onset_jitter() {
        let c = Classifier::builtin();
        let base = builtin_melody(MelodyId::A);
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = base.anonymized();
            for o in &mut p.onsets {
                o.time_ms += rng.random_range(-10.0..=10.0);
            }
            assert_eq!(c.classify(&p, &MelodyId::ALL).unwrap(), MelodyId::A, "seed {seed}");
        }
    }

    #[test]
    fn melodies_are_well_separated() {
        let sigs: Vec<_> = MelodyId::ALL.map(|id| ioi_signature(&builtin_melody(id)).unwrap()).to_vec();
        let mut min_cross = f64::INFINITY;
        for i in 0..4 {
            assert_eq!(dtw_distance(sigs[i].values(), sigs[i].values()), 0.0);
            for j in 0..4 {
                if i != j {
                    min_cross = min_cross.min(dtw_distance(sigs[i].values(), sigs[j].values()));
                }
            }
        }
        // worst within-melody distance under the ±10 ms jitter budget
        let mut max_self: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (i, id) in MelodyId::ALL.into_iter().enumerate() {
            for _ in 0..200 {
                let mut p = builtin_melody(id);
                for o in &mut p.onsets {
                    o.time_ms += rng.random_range(-10.0..=10.0);
                }
                max_self = max_self.max(dtw_distance(ioi_signature(&p).unwrap().values(), sigs[i].values()));
            }
        }
        assert!(min_cross > 10.0 * max_self, "cross {min_cross} self {max_self}");
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let shared = at(&[0.0, 100.0, 300.0, 400.0]);
        let c = Classifier::from_patterns([
            (MelodyId::C, shared.clone()),
            (MelodyId::B, shared.clone()),
            (MelodyId::D, at(&[0.0, 50.0, 400.0, 410.0])),
        ])
        .unwrap();
        assert_eq!(c.classify(&shared, &MelodyId::ALL).unwrap(), MelodyId::B);
        assert_eq!(c.classify(&shared, &[MelodyId::D, MelodyId::C]).unwrap(), MelodyId::C);
        assert_eq!(c.classify(&shared, &[MelodyId::A]), Err(MelodyError::NoCandidates));
    }
}
