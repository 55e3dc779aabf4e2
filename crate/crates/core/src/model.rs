//! Shared vocabulary: force frames, rhythm patterns, trial conditions and the
//! monotonic clock every stage of the pipeline timestamps against.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sensor full scale in newtons (the recorder pads are rated 10 N).
pub const FULL_SCALE_N: f64 = 10.0;

/// Number of tactile channels (index, middle and ring finger).
pub const CHANNELS: usize = 3;

/// A tactile channel. Stored 0-based; printed and parsed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel(u8);

impl Channel {
    pub const ALL: [Channel; CHANNELS] = [Channel(0), Channel(1), Channel(2)];

    pub fn from_index(index: usize) -> Option<Channel> {
        (index < CHANNELS).then_some(Channel(index as u8))
    }

    pub fn from_number(number: u32) -> Option<Channel> {
        (1..=CHANNELS as u32)
            .contains(&number)
            .then(|| Channel(number as u8 - 1))
    }

    /// 0-based index into frame force arrays.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 1-based user-facing number.
    pub fn number(self) -> u32 {
        self.0 as u32 + 1
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One 3-channel force sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceFrame {
    pub seq: u32,
    pub timestamp_us: u64,
    /// Newtons, one per channel, each within `[0, FULL_SCALE_N]`.
    pub forces: [f64; CHANNELS],
}

impl ForceFrame {
    pub fn new(seq: u32, timestamp_us: u64, forces: [f64; CHANNELS]) -> Self {
        ForceFrame {
            seq,
            timestamp_us,
            forces,
        }
    }

    pub fn zero(seq: u32, timestamp_us: u64) -> Self {
        ForceFrame::new(seq, timestamp_us, [0.0; CHANNELS])
    }

    pub fn force(&self, channel: Channel) -> f64 {
        self.forces[channel.index()]
    }

    pub fn is_silent(&self) -> bool {
        self.forces.iter().all(|&f| f == 0.0)
    }

    /// Checks the per-frame force range. Stream-level ordering is checked by
    /// [`check_stream`].
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, &f) in self.forces.iter().enumerate() {
            if !(0.0..=FULL_SCALE_N).contains(&f) {
                return Err(ModelError::ForceOutOfRange {
                    channel: i + 1,
                    force_n: f,
                });
            }
        }
        Ok(())
    }
}

/// Verifies `seq` steps by exactly one and timestamps never go backwards.
pub fn check_stream(frames: &[ForceFrame]) -> Result<(), ModelError> {
    for pair in frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.seq != a.seq.wrapping_add(1) {
            return Err(ModelError::SequenceGap {
                after: a.seq,
                found: b.seq,
            });
        }
        if b.timestamp_us < a.timestamp_us {
            return Err(ModelError::TimeReversal { seq: b.seq });
        }
    }
    Ok(())
}

/// One of the four benchmark melodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MelodyId {
    A,
    B,
    C,
    D,
}

impl MelodyId {
    pub const ALL: [MelodyId; 4] = [MelodyId::A, MelodyId::B, MelodyId::C, MelodyId::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<MelodyId> {
        MelodyId::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn title(self) -> &'static str {
        match self {
            MelodyId::A => "Baby Shark",
            MelodyId::B => "Happy Birthday",
            MelodyId::C => "Jingle Bells",
            MelodyId::D => "William Tell Overture Finale",
        }
    }
}

impl fmt::Display for MelodyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for MelodyId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(MelodyId::A),
            "B" | "b" => Ok(MelodyId::B),
            "C" | "c" => Ok(MelodyId::C),
            "D" | "d" => Ok(MelodyId::D),
            other => Err(ModelError::UnknownMelody(other.to_string())),
        }
    }
}

/// Auditory condition of a trial block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "none")]
    NoNoise,
    #[serde(rename = "white")]
    WhiteNoise,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::NoNoise, Condition::WhiteNoise];

    /// Label used in trial logs.
    pub fn label(self) -> &'static str {
        match self {
            Condition::NoNoise => "none",
            Condition::WhiteNoise => "white",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(Condition::NoNoise),
            "white" => Ok(Condition::WhiteNoise),
            other => Err(ModelError::UnknownCondition(other.to_string())),
        }
    }
}

/// A single timed tap in a rhythm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Onset {
    pub time_ms: f64,
    pub channel: Channel,
    pub duration_ms: f64,
    /// Fraction of full-scale force, in `(0, 1]`.
    pub intensity: f64,
}

impl Onset {
    pub fn new(time_ms: f64, channel: Channel, duration_ms: f64, intensity: f64) -> Self {
        Onset {
            time_ms,
            channel,
            duration_ms,
            intensity,
        }
    }

    pub fn end_ms(&self) -> f64 {
        self.time_ms + self.duration_ms
    }
}

/// A melody reduced to timed, per-channel onsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RhythmPattern {
    pub melody_id: Option<MelodyId>,
    pub onsets: Vec<Onset>,
}

/// Why a particular onset fails validation.
#[derive(Debug, Clone, PartialEq)]
pub enum OnsetProblem {
    NegativeTime,
    NonPositiveDuration,
    IntensityOutOfRange,
    OutOfOrder,
    Overlaps { earlier: usize },
}

impl fmt::Display for OnsetProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OnsetProblem::NegativeTime => f.write_str("negative or non-finite time"),
            OnsetProblem::NonPositiveDuration => f.write_str("duration must be positive"),
            OnsetProblem::IntensityOutOfRange => f.write_str("intensity must be in (0, 1]"),
            OnsetProblem::OutOfOrder => f.write_str("time earlier than the previous onset"),
            OnsetProblem::Overlaps { earlier } => {
                write!(f, "overlaps onset {earlier} on the same channel")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetIssue {
    pub index: usize,
    pub problem: OnsetProblem,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid rhythm pattern: {}", format_issues(.issues))]
pub struct PatternError {
    pub issues: Vec<OnsetIssue>,
}

fn format_issues(issues: &[OnsetIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("onset {}: {}", i.index, i.problem))
        .collect::<Vec<_>>()
        .join("; ")
}

impl RhythmPattern {
    pub fn new(melody_id: Option<MelodyId>, onsets: Vec<Onset>) -> Self {
        RhythmPattern { melody_id, onsets }
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    /// End of the last sounding onset.
    pub fn end_ms(&self) -> f64 {
        self.onsets.iter().map(Onset::end_ms).fold(0.0, f64::max)
    }

    /// Reports every offending onset rather than stopping at the first one.
    pub fn validate(&self) -> Result<(), PatternError> {
        let mut issues = Vec::new();
        let mut last_on_channel: [Option<usize>; CHANNELS] = [None; CHANNELS];
        let mut prev_time = f64::NEG_INFINITY;
        for (index, onset) in self.onsets.iter().enumerate() {
            let mut push = |problem| issues.push(OnsetIssue { index, problem });
            if !(onset.time_ms.is_finite() && onset.time_ms >= 0.0) {
                push(OnsetProblem::NegativeTime);
            }
            if !(onset.duration_ms.is_finite() && onset.duration_ms > 0.0) {
                push(OnsetProblem::NonPositiveDuration);
            }
            if !(onset.intensity > 0.0 && onset.intensity <= 1.0) {
                push(OnsetProblem::IntensityOutOfRange);
            }
            if onset.time_ms < prev_time {
                push(OnsetProblem::OutOfOrder);
            }
            let slot = &mut last_on_channel[onset.channel.index()];
            if let Some(earlier) = *slot {
                if self.onsets[earlier].end_ms() > onset.time_ms {
                    push(OnsetProblem::Overlaps { earlier });
                }
            }
            *slot = Some(index);
            prev_time = prev_time.max(onset.time_ms);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PatternError { issues })
        }
    }

    /// Multiplies every time and duration by `factor`.
    pub fn scale_tempo(&self, factor: f64) -> RhythmPattern {
        RhythmPattern {
            melody_id: self.melody_id,
            onsets: self
                .onsets
                .iter()
                .map(|o| Onset {
                    time_ms: o.time_ms * factor,
                    duration_ms: o.duration_ms * factor,
                    ..*o
                })
                .collect(),
        }
    }

    /// Copy without the melody label, as handed to a blind answerer.
    pub fn anonymized(&self) -> RhythmPattern {
        RhythmPattern {
            melody_id: None,
            onsets: self.onsets.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("channel {channel} force {force_n} N outside [0, 10] N")]
    ForceOutOfRange { channel: usize, force_n: f64 },
    #[error("sequence jumps from {after} to {found}")]
    SequenceGap { after: u32, found: u32 },
    #[error("timestamp goes backwards at seq {seq}")]
    TimeReversal { seq: u32 },
    #[error("unknown melody id {0:?} (expected A-D)")]
    UnknownMelody(String),
    #[error("unknown condition {0:?} (expected none or white)")]
    UnknownCondition(String),
}

fn clock_origin() -> Instant {
    static ORIGIN: OnceLock<Instant> = OnceLock::new();
    *ORIGIN.get_or_init(Instant::now)
}

/// Microseconds on a process-wide monotonic clock. Only differences are
/// meaningful.
pub fn monotonic_now() -> u64 {
    clock_origin().elapsed().as_micros() as u64
}

/// Time source for components that need to be driven by real or virtual time.
pub trait Clock {
    fn now_us(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MonotonicClock;

impl Clock for MonotonicClock {
    fn now_us(&self) -> u64 {
        monotonic_now()
    }
}

/// Hand-advanced clock for simulations and tests.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: std::sync::atomic::AtomicU64,
}

impl ManualClock {
    pub fn new(start_us: u64) -> Self {
        ManualClock {
            now: start_us.into(),
        }
    }

    pub fn set(&self, now_us: u64) {
        self.now.store(now_us, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn advance(&self, delta_us: u64) {
        self.now
            .fetch_add(delta_us, std::sync::atomic::Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_us(&self) -> u64 {
        self.now.load(std::sync::atomic::Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn ch(n: u32) -> Channel {
        Channel::from_number(n).unwrap()
    }

    #[test]
    fn clock_is_monotonic() {
        let t1 = monotonic_now();
        let t2 = monotonic_now();
        assert!(t2 >= t1);
    }

    #[test]
    fn clock_progresses_across_sleep() {
        let t1 = monotonic_now();
        std::thread::sleep(Duration::from_millis(10));
        let t2 = monotonic_now();
        assert!(t2 - t1 >= 10_000);
    }

    #[test]
    fn clock_callable_from_other_threads() {
        let here = monotonic_now();
        let there = std::thread::spawn(monotonic_now).join().unwrap();
        assert!(there >= here);
    }

    #[test]
    fn channel_numbering() {
        assert_eq!(Channel::from_number(0), None);
        assert_eq!(Channel::from_number(4), None);
        assert_eq!(ch(1).index(), 0);
        assert_eq!(ch(3).number(), 3);
        assert_eq!(Channel::from_index(2), Some(ch(3)));
    }

    #[test]
    fn frame_range() {
        assert!(ForceFrame::new(0, 0, [0.0, 10.0, 5.0]).validate().is_ok());
        assert!(ForceFrame::new(0, 0, [10.001, 0.0, 0.0]).validate().is_err());
        assert!(ForceFrame::new(0, 0, [0.0, -0.1, 0.0]).validate().is_err());
        assert!(ForceFrame::new(0, 0, [0.0, 0.0, f64::NAN]).validate().is_err());
    }

    #[test]
    fn stream_checks() {
        let ok = [ForceFrame::zero(4, 10), ForceFrame::zero(5, 10), ForceFrame::zero(6, 20)];
        assert!(check_stream(&ok).is_ok());
        let gap = [ForceFrame::zero(4, 10), ForceFrame::zero(6, 20)];
        assert!(matches!(check_stream(&gap), Err(ModelError::SequenceGap { .. })));
        let back = [ForceFrame::zero(4, 10), ForceFrame::zero(5, 5)];
        assert!(matches!(check_stream(&back), Err(ModelError::TimeReversal { seq: 5 })));
    }

    #[test]
    fn overlapping_same_channel_rejected() {
        let p = RhythmPattern::new(
            None,
            vec![Onset::new(0.0, ch(1), 100.0, 1.0), Onset::new(50.0, ch(1), 10.0, 1.0)],
        );
        let err = p.validate().unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert_eq!(err.issues[0].index, 1);
        assert_eq!(err.issues[0].problem, OnsetProblem::Overlaps { earlier: 0 });
    }

    #[test]
    fn touching_onsets_and_other_channels_allowed() {
        let p = RhythmPattern::new(
            None,
            vec![
                Onset::new(0.0, ch(1), 100.0, 1.0),
                Onset::new(50.0, ch(2), 100.0, 0.5),
                Onset::new(100.0, ch(1), 10.0, 1.0),
            ],
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn validation_lists_every_issue() {
        let p = RhythmPattern::new(
            None,
            vec![
                Onset::new(10.0, ch(1), 0.0, 1.0),
                Onset::new(5.0, ch(2), 10.0, 1.5),
            ],
        );
        let err = p.validate().unwrap_err();
        let problems: Vec<_> = err.issues.iter().map(|i| i.problem.clone()).collect();
        assert_eq!(
            problems,
            vec![
                OnsetProblem::NonPositiveDuration,
                OnsetProblem::IntensityOutOfRange,
                OnsetProblem::OutOfOrder
            ]
        );
    }

    #[test]
    fn labels_parse() {
        assert_eq!("c".parse::<MelodyId>().unwrap(), MelodyId::C);
        assert!("E".parse::<MelodyId>().is_err());
        assert_eq!("white".parse::<Condition>().unwrap(), Condition::WhiteNoise);
        assert_eq!(Condition::NoNoise.to_string(), "none");
        assert_eq!(Condition::ALL.len(), 2);
    }

    #[test]
    fn manual_clock() {
        let c = ManualClock::new(5);
        c.advance(10);
        assert_eq!(c.now_us(), 15);
        c.set(3);
        assert_eq!(c.now_us(), 3);
    }

    proptest::proptest! {
        #[test]
        fn overlap_always_detected(
            start in 0.0f64..1000.0,
            dur in 1.0f64..500.0,
            frac in 0.0f64..0.999,
            chan in 1u32..=3,
        ) {
            let second = start + dur * frac;
            let p = RhythmPattern::new(None, vec![
                Onset::new(start, ch(chan), dur, 1.0),
                Onset::new(second, ch(chan), 10.0, 1.0),
            ]);
            proptest::prop_assert!(p.validate().is_err());
        }
    }
}
