use rand::seq::SliceRandom;

use super::ExperimentError;
use crate::model::MelodyId;
use crate::rng::substream;

/// Every melody `reps` times, in a seeded uniform random order.
pub fn build_session_plan(melodies: &[MelodyId], reps: usize, seed: u64) -> Result<Vec<MelodyId>, ExperimentError> {
    if reps == 0 {
        return Err(ExperimentError::NoRepetitions);
    }
    let mut plan: Vec<MelodyId> = melodies.iter().flat_map(|&m| std::iter::repeat_n(m, reps)).collect();
    plan.shuffle(&mut substream(seed, "session-plan"));
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(plan: &[MelodyId]) -> [usize; 4] {
        let mut c = [0; 4];
        for m in plan {
            c[m.index()] += 1;
        }
        c
    }

    #[test]
    fn defaults_give_twelve() {
        let plan = build_session_plan(&MelodyId::ALL, 3, 0).unwrap();
        assert_eq!(plan.len(), 12);
        assert_eq!(counts(&plan), [3; 4]);
    }

    #[test]
    fn seeded() {
        let a = build_session_plan(&MelodyId::ALL, 3, 42).unwrap();
        assert_eq!(a, build_session_plan(&MelodyId::ALL, 3, 42).unwrap());
        assert_ne!(build_session_plan(&MelodyId::ALL, 3, 0).unwrap(), build_session_plan(&MelodyId::ALL, 3, 1).unwrap());
    }

    #[test]
    fn many_seeds_are_exact_multisets() {
        let mut distinct = std::collections::HashSet::new();
        for seed in 0..100 {
            let plan = build_session_plan(&MelodyId::ALL, 3, seed).unwrap();
            assert_eq!(counts(&plan), [3; 4]);
            distinct.insert(plan);
        }
        // 12!/(3!)^4 = 369600 orders; 100 draws should almost all differ
        assert!(distinct.len() >= 98);
    }

    #[test]
    fn first_position_is_roughly_uniform() {
        let mut first = [0usize; 4];
        for seed in 0..4000 {
            first[build_session_plan(&MelodyId::ALL, 3, seed).unwrap()[0].index()] += 1;
        }
        // each ~1000; 6 sigma ≈ 165
        assert!(first.iter().all(|&c| (835..=1165).contains(&c)), "{first:?}");
    }

    #[test]
    fn zero_reps() {
        assert!(matches!(build_session_plan(&MelodyId::ALL, 0, 0), Err(ExperimentError::NoRepetitions)));
    }
}
