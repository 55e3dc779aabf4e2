use std::fmt;

use serde::Serialize;

use super::{ExperimentError, TrialRecord};
use crate::model::MelodyId;

/// Two-decimal rounding, half away from zero (0.125 → 0.13).
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Rows are presented melodies, columns answered melodies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u32; 4]; 4],
    /// Row-normalized counts; `None` for melodies never presented.
    pub proportions: [Option<[f64; 4]>; 4],
}

impl ConfusionMatrix {
    pub fn from_records(records: &[TrialRecord]) -> Result<Self, ExperimentError> {
        if records.is_empty() {
            return Err(ExperimentError::EmptyData);
        }
        let mut counts = [[0u32; 4]; 4];
        for r in records {
            counts[r.presented.index()][r.answered.index()] += 1;
        }
        let proportions = counts.map(|row| {
            let total: u32 = row.iter().sum();
            (total > 0).then(|| row.map(|c| c as f64 / total as f64))
        });
        Ok(ConfusionMatrix { counts, proportions })
    }

    pub fn row_total(&self, presented: MelodyId) -> u32 {
        self.counts[presented.index()].iter().sum()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u32 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn proportion(&self, presented: MelodyId, answered: MelodyId) -> Option<f64> {
        self.proportions[presented.index()].map(|row| row[answered.index()])
    }

    /// Proportions as printed in a table: two decimals.
    pub fn rounded(&self) -> [Option<[f64; 4]>; 4] {
        self.proportions.map(|row| row.map(|r| r.map(round2)))
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<31} {:>6} {:>6} {:>6} {:>6} {:>6}", "presented \\ answered", "A", "B", "C", "D", "n")?;
        for (i, row) in self.rounded().iter().enumerate() {
            let m = MelodyId::from_index(i).unwrap();
            write!(f, "{:<31}", format!("{} {}", m, m.title()))?;
            match row {
                Some(r) => {
                    for p in r {
                        write!(f, " {p:>6.2}")?;
                    }
                }
                None => write!(f, "{:>28}", "-")?,
            }
            writeln!(f, " {:>6}", self.row_total(m))?;
        }
        Ok(())
    }
}

pub fn overall_accuracy(records: &[TrialRecord]) -> Result<f64, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::EmptyData);
    }
    Ok(records.iter().filter(|r| r.correct()).count() as f64 / records.len() as f64)
}
