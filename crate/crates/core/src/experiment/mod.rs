//! Blind melody-recognition trials and their analysis.

mod confusion;
mod log;
mod plan;
mod report;
mod session;
pub mod stats;

pub use confusion::{overall_accuracy, round2, ConfusionMatrix};
pub use log::{read_trial_log, write_trial_log, TRIAL_LOG_HEADER};
pub use plan::build_session_plan;
pub use report::{subject_scores, Analysis, AnalysisReport, ConditionReport, OneWayBlock};
pub use session::{
    run_session, AnswerError, AnswerSource, ClassifierAnswers, PresentError, Presenter, ScriptedAnswers,
    SessionConfig, SessionOutcome, Stimulus,
};
pub use stats::{
    anova_one_way, anova_one_way_within, anova_two_factor, f_upper_tail, AnovaResult, CellScore, StatsError,
    TwoFactorAnova, TwoFactorDesign,
};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Condition, MelodyId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub participant: String,
    pub condition: Condition,
    pub trial_index: u32,
    pub presented: MelodyId,
    pub answered: MelodyId,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.presented == self.answered
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no trial records")]
    EmptyData,
    #[error("session plan needs at least one repetition")]
    NoRepetitions,
    #[error("trial log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error("presenter failed on trial {trial_index}: {source}")]
    Present {
        trial_index: u32,
        #[source]
        source: PresentError,
    },
    #[error("answer source unavailable: {0}")]
    AnswerUnavailable(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
