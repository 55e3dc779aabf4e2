//! Blind trial sessions.

use std::collections::VecDeque;
use std::time::Duration;

use thiserror::Error;

use super::{ExperimentError, TrialRecord};
use crate::melody::{builtin_melody, Classifier};
use crate::model::{Condition, MelodyId, RhythmPattern};

#[derive(Debug, Error)]
#[error("{0}")]
pub struct PresentError(pub String);

/// Renders a melody to the subject.
pub trait Presenter {
    /// Returns what a machine observer perceived (e.g. onsets recovered from
    /// the display), or `None` when only a human can perceive the output.
    fn present(
        &mut self,
        trial_index: u32,
        pattern: &RhythmPattern,
        condition: Condition,
    ) -> Result<Option<RhythmPattern>, PresentError>;
}

/// What the answer source is given. Deliberately carries no melody id.
#[derive(Debug, Clone)]
pub struct Stimulus {
    pub trial_index: u32,
    pub perceived: Option<RhythmPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("no answer within the timeout")]
    Timeout,
    #[error("{0}")]
    Unavailable(String),
}

pub trait AnswerSource {
    fn answer(&mut self, stimulus: &Stimulus, timeout: Duration) -> Result<MelodyId, AnswerError>;
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub answer_timeout: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { answer_timeout: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionOutcome {
    pub records: Vec<TrialRecord>,
    /// Trials without a valid answer; excluded from `records`.
    pub invalid: Vec<u32>,
}

pub fn run_session(
    participant: &str,
    plan: &[MelodyId],
    condition: Condition,
    presenter: &mut dyn Presenter,
    answers: &mut dyn AnswerSource,
    cfg: &SessionConfig,
) -> Result<SessionOutcome, ExperimentError> {
    let mut outcome = SessionOutcome::default();
    for (i, &melody) in plan.iter().enumerate() {
        let trial_index = i as u32;
        let pattern = builtin_melody(melody);
        let perceived = presenter
            .present(trial_index, &pattern, condition)
            .map_err(|source| ExperimentError::Present { trial_index, source })?;
        let stimulus = Stimulus { trial_index, perceived: perceived.map(|p| p.anonymized()) };
        match answers.answer(&stimulus, cfg.answer_timeout) {
            Ok(answered) => outcome.records.push(TrialRecord {
                participant: participant.to_string(),
                condition,
                trial_index,
                presented: melody,
                answered,
            }),
            Err(AnswerError::Timeout) => {
                log::warn!("{participant}/{condition} trial {trial_index}: no answer, marked invalid");
                outcome.invalid.push(trial_index);
            }
            Err(AnswerError::Unavailable(why)) => return Err(ExperimentError::AnswerUnavailable(why)),
        }
    }
    Ok(outcome)
}

/// Answers by classifying the perceived pattern.
#[derive(Debug, Clone)]
pub struct ClassifierAnswers {
    classifier: Classifier,
    candidates: Vec<MelodyId>,
}

impl ClassifierAnswers {
    pub fn new(classifier: Classifier) -> Self {
        ClassifierAnswers { classifier, candidates: MelodyId::ALL.to_vec() }
    }
}

impl Default for ClassifierAnswers {
    fn default() -> Self {
        Self::new(Classifier::builtin())
    }
}

impl AnswerSource for ClassifierAnswers {
    fn answer(&mut self, stimulus: &Stimulus, _timeout: Duration) -> Result<MelodyId, AnswerError> {
        let pattern = stimulus
            .perceived
            .as_ref()
            .ok_or_else(|| AnswerError::Unavailable("presenter gives the classifier nothing to observe".into()))?;
        // an unreadable stimulus is a missed answer, not a broken session
        self.classifier.classify(pattern, &self.candidates).map_err(|e| {
            log::warn!("trial {}: {e}", stimulus.trial_index);
            AnswerError::Timeout
        })
    }
}

/// Replays fixed answers; `None` entries time out.
#[derive(Debug, Clone)]
pub struct ScriptedAnswers(VecDeque<Option<MelodyId>>);

impl ScriptedAnswers {
    pub fn new(answers: impl IntoIterator<Item = Option<MelodyId>>) -> Self {
        ScriptedAnswers(answers.into_iter().collect())
    }

    pub fn always(id: MelodyId, n: usize) -> Self {
        Self::new(std::iter::repeat_n(Some(id), n))
    }
}

impl AnswerSource for ScriptedAnswers {
    fn answer(&mut self, _: &Stimulus, _: Duration) -> Result<MelodyId, AnswerError> {
        match self.0.pop_front() {
            Some(Some(id)) => Ok(id),
            Some(None) => Err(AnswerError::Timeout),
            None => Err(AnswerError::Unavailable("script exhausted".into())),
        }
    }
}
