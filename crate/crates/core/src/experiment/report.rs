//! Analysis report over a trial log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use super::confusion::ConfusionMatrix;
use super::stats::{
    anova_one_way, anova_one_way_within, anova_two_factor, AnovaResult, CellScore, StatsError, TwoFactorAnova,
    TwoFactorDesign,
};
use super::{ExperimentError, TrialRecord};
use crate::model::{Condition, MelodyId};

/// Proportion correct per participant × melody × condition.
pub fn subject_scores(records: &[TrialRecord]) -> Vec<CellScore> {
    let mut tally: BTreeMap<(&str, MelodyId, Condition), (u32, u32)> = BTreeMap::new();
    for r in records {
        let t = tally.entry((r.participant.as_str(), r.presented, r.condition)).or_default();
        t.0 += r.correct() as u32;
        t.1 += 1;
    }
    tally
        .into_iter()
        .map(|((p, m, c), (ok, n))| CellScore { participant: p.to_string(), melody: m, condition: c, score: ok as f64 / n as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis<T> {
    Result(T),
    InsufficientData(String),
}

impl<T> From<Result<T, StatsError>> for Analysis<T> {
    fn from(r: Result<T, StatsError>) -> Self {
        match r {
            Ok(v) => Analysis::Result(v),
            Err(StatsError::InsufficientData(why)) => Analysis::InsufficientData(why),
            Err(e) => Analysis::InsufficientData(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneWayBlock {
    /// Per-subject scores grouped by melody; df = (k−1, N−k).
    pub between_groups: Analysis<AnovaResult>,
    /// Subjects as blocks; df = (k−1, (k−1)(n−1)).
    pub within_subjects: Analysis<AnovaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub trials: u32,
    pub participants: usize,
    pub counts: [[u32; 4]; 4],
    /// Row proportions rounded to two decimals; `null` rows were never presented.
    pub proportions: [Option<[f64; 4]>; 4],
    pub accuracy: f64,
    pub accuracy_percent: u32,
    pub anova: OneWayBlock,
    #[serde(skip)]
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub trials: usize,
    pub participants: usize,
    pub conditions: Vec<ConditionReport>,
    pub two_factor: Vec<Analysis<TwoFactorAnova>>,
}

fn one_way(scores: &[CellScore]) -> OneWayBlock {
    let melodies: BTreeSet<MelodyId> = scores.iter().map(|s| s.melody).collect();
    let groups: Vec<Vec<f64>> = melodies
        .iter()
        .map(|&m| scores.iter().filter(|s| s.melody == m).map(|s| s.score).collect())
        .collect();
    let mut by_subject: BTreeMap<&str, BTreeMap<MelodyId, f64>> = BTreeMap::new();
    for s in scores {
        by_subject.entry(&s.participant).or_default().insert(s.melody, s.score);
    }
    let complete: Vec<Vec<f64>> = by_subject
        .values()
        .filter(|row| row.len() == melodies.len())
        .map(|row| row.values().copied().collect())
        .collect();
    let dropped = by_subject.len() - complete.len();
    let mut within: Analysis<AnovaResult> = anova_one_way_within(&complete).into();
    if let (Analysis::InsufficientData(msg), true) = (&mut within, dropped > 0) {
        let _ = write!(msg, " ({dropped} participants lack some melodies)");
    }
    OneWayBlock { between_groups: anova_one_way(&groups).into(), within_subjects: within }
}

impl AnalysisReport {
    pub fn from_records(records: &[TrialRecord]) -> Result<Self, ExperimentError> {
        if records.is_empty() {
            return Err(ExperimentError::EmptyData);
        }
        let scores = subject_scores(records);
        let mut conditions = Vec::new();
        for c in Condition::ALL {
            let subset: Vec<TrialRecord> = records.iter().filter(|r| r.condition == c).cloned().collect();
            if subset.is_empty() {
                continue;
            }
            let cm = ConfusionMatrix::from_records(&subset)?;
            let accuracy = cm.accuracy();
            let cond_scores: Vec<CellScore> = scores.iter().filter(|s| s.condition == c).cloned().collect();
            conditions.push(ConditionReport {
                condition: c,
                trials: cm.total(),
                participants: subset.iter().map(|r| r.participant.as_str()).collect::<BTreeSet<_>>().len(),
                counts: cm.counts,
                proportions: cm.rounded(),
                accuracy,
                accuracy_percent: (accuracy * 100.0).round() as u32,
                anova: one_way(&cond_scores),
                confusion: cm,
            });
        }
        let two_factor = [TwoFactorDesign::RepeatedMeasures, TwoFactorDesign::BetweenSubjects]
            .into_iter()
            .map(|d| anova_two_factor(&scores, d).into())
            .collect();
        Ok(AnalysisReport {
            trials: records.len(),
            participants: records.iter().map(|r| r.participant.as_str()).collect::<BTreeSet<_>>().len(),
            conditions,
            two_factor,
        })
    }

    pub fn condition(&self, c: Condition) -> Option<&ConditionReport> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

fn write_analysis(f: &mut fmt::Formatter<'_>, label: &str, a: &Analysis<AnovaResult>) -> fmt::Result {
    match a {
        Analysis::Result(r) => writeln!(f, "  {label}: F({}, {}) = {:.4}, p = {:.4}", r.df_between, r.df_error, r.f, r.p),
        Analysis::InsufficientData(why) => writeln!(f, "  {label}: insufficient data: {why}"),
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} trials, {} participants", self.trials, self.participants)?;
        for c in &self.conditions {
            writeln!(f)?;
            writeln!(f, "== condition: {} ({} trials, {} participants) ==", c.condition, c.trials, c.participants)?;
            writeln!(f, "row proportions:")?;
            write!(f, "{}", c.confusion)?;
            writeln!(f, "counts:")?;
            writeln!(f, "{:<31} {:>6} {:>6} {:>6} {:>6}", "", "A", "B", "C", "D")?;
            for (i, row) in c.counts.iter().enumerate() {
                let m = MelodyId::from_index(i).unwrap();
                writeln!(f, "{:<31} {:>6} {:>6} {:>6} {:>6}", m.to_string(), row[0], row[1], row[2], row[3])?;
            }
            writeln!(f, "overall accuracy: {:.3} ({}%)", c.accuracy, c.accuracy_percent)?;
            writeln!(f, "one-way ANOVA on per-subject scores (alpha {}):", super::stats::DEFAULT_ALPHA)?;
            write_analysis(f, "between groups", &c.anova.between_groups)?;
            write_analysis(f, "within subjects", &c.anova.within_subjects)?;
        }
        writeln!(f)?;
        writeln!(f, "== two-factor ANOVA (melody x condition) ==")?;
        for (design, a) in [TwoFactorDesign::RepeatedMeasures, TwoFactorDesign::BetweenSubjects].iter().zip(&self.two_factor) {
            writeln!(f, "{}", design.convention())?;
            match a {
                Analysis::Result(t) => {
                    for e in [&t.melody, &t.condition, &t.interaction] {
                        write_analysis(f, &e.effect, &Analysis::Result(e.clone()))?;
                    }
                }
                Analysis::InsufficientData(why) => writeln!(f, "  insufficient data: {why}")?,
            }
        }
        Ok(())
    }
}
