//! The whole chain in virtual time: pattern → frames → datagrams → lossy link
//! → jitter buffer → linkage display → recovered onsets.

use serde::Serialize;
use thiserror::Error;

use crate::display::{extract_onsets, DisplayConfig, DisplayError, LinkageDisplay, StateHistory};
use crate::experiment::{PresentError, Presenter};
use crate::model::{Condition, ForceFrame, RhythmPattern, FULL_SCALE_N};
use crate::recorder::{encode_pattern, SensorConfig, SensorError};
use crate::rng::substream;
use crate::wire::{
    decode_datagram, encode_datagram, FrameFlags, JitterBuffer, JitterBufferConfig, JitterConfigError, JitterStats,
    LinkStats, LoopbackFaults, LoopbackLink,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Display(#[from] DisplayError),
    #[error(transparent)]
    Jitter(#[from] JitterConfigError),
    #[error("sensor rate {sensor_hz} Hz must equal display tick rate {display_hz} Hz")]
    RateMismatch { sensor_hz: u32, display_hz: u32 },
    #[error("frame {seq}: {reason}")]
    Encode { seq: u32, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub sensor: SensorConfig,
    pub jitter: JitterBufferConfig,
    pub display: DisplayConfig,
    pub faults: LoopbackFaults,
    /// Extra rendering after the last frame is due, so linkages can return home.
    pub tail_ms: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sensor: SensorConfig::default(),
            jitter: JitterBufferConfig::default(),
            display: DisplayConfig::default(),
            faults: LoopbackFaults::lossless(),
            tail_ms: 300,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.sensor.validate()?;
        self.display.validate()?;
        if self.sensor.sample_rate_hz != self.display.tick_rate_hz {
            return Err(PipelineError::RateMismatch {
                sensor_hz: self.sensor.sample_rate_hz,
                display_hz: self.display.tick_rate_hz,
            });
        }
        self.jitter.validate(self.sensor.sample_rate_hz)?;
        Ok(())
    }

    /// Delay from a frame's timestamp to first skin contact for a full-scale
    /// tap: buffer latency plus servo travel from home.
    pub fn render_latency_ms(&self) -> f64 {
        let travel = LinkageDisplay::contact_latency_ticks(&self.display, FULL_SCALE_N).unwrap_or(0);
        self.jitter.target_latency_ms as f64 + travel as f64 * self.display.tick_period_ms()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    #[serde(skip)]
    pub history: StateHistory,
    /// Onsets recovered from skin contact, shifted back by `latency_ms`.
    #[serde(skip)]
    pub onsets: RhythmPattern,
    pub latency_ms: f64,
    pub frames: usize,
    pub ticks: usize,
    pub link: LinkStats,
    pub jitter: JitterStats,
    pub end_of_stream: bool,
}

/// Shifts onsets earlier by `latency_ms`, dropping any that would start
/// before zero.
pub fn align_onsets(pattern: &RhythmPattern, latency_ms: f64) -> RhythmPattern {
    let mut out = pattern.clone();
    for o in &mut out.onsets {
        o.time_ms -= latency_ms;
    }
    out.onsets.retain(|o| o.time_ms >= 0.0);
    out
}

/// Frames with the last one flagged as end of stream.
pub fn flagged(frames: Vec<ForceFrame>) -> Vec<(ForceFrame, FrameFlags)> {
    let n = frames.len();
    frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| (f, if i + 1 == n { FrameFlags::LAST } else { FrameFlags::NONE }))
        .collect()
}

pub fn run_loopback(pattern: &RhythmPattern, cfg: &PipelineConfig, seed: u64) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let frames = flagged(encode_pattern(pattern, &cfg.sensor)?);
    let mut link = LoopbackLink::new(cfg.faults, substream(seed, "loopback-link"));
    let mut buffer = JitterBuffer::new(cfg.jitter);
    let mut display = LinkageDisplay::new(cfg.display)?;
    let mut history = StateHistory::new(cfg.display.tick_rate_hz);

    let tick_us = 1_000_000 / cfg.display.tick_rate_hz as u64;
    let dt = cfg.display.tick_period_s();
    let last_ts = frames.last().map_or(0, |(f, _)| f.timestamp_us);
    let horizon_us = last_ts
        + cfg.jitter.target_latency_ms as u64 * 1000
        + cfg.jitter.gap_timeout_ms as u64 * 1000
        + cfg.tail_ms as u64 * 1000;

    let mut next = 0;
    let mut now = 0u64;
    while now <= horizon_us {
        while next < frames.len() && frames[next].0.timestamp_us <= now {
            let (frame, flags) = &frames[next];
            let bytes = encode_datagram(frame, *flags)
                .map_err(|e| PipelineError::Encode { seq: frame.seq, reason: e.to_string() })?;
            link.send(&bytes, frame.timestamp_us);
            next += 1;
        }
        for (arrival, bytes) in link.deliver(now) {
            match decode_datagram(&bytes) {
                Ok((frame, flags)) => {
                    buffer.push_with_flags(frame, flags, arrival);
                }
                Err(_) => buffer.note_malformed(),
            }
        }
        let forces = buffer.pop(now).forces();
        history.push(display.render_tick(&forces, dt));
        now += tick_us;
    }

    let latency_ms = cfg.render_latency_ms();
    let onsets = align_onsets(&extract_onsets(&history, cfg.display.depth_max_mm), latency_ms);
    Ok(PipelineReport {
        ticks: history.len(),
        history,
        onsets,
        latency_ms,
        frames: frames.len(),
        link: link.stats(),
        jitter: buffer.stats(),
        end_of_stream: buffer.end_of_stream(),
    })
}

/// Presents each trial through a fresh seeded loopback run.
#[derive(Debug, Clone)]
pub struct LoopbackPresenter {
    pub config: PipelineConfig,
    pub seed: u64,
    pub reports: Vec<PipelineReport>,
}

impl LoopbackPresenter {
    pub fn new(config: PipelineConfig, seed: u64) -> Self {
        LoopbackPresenter { config, seed, reports: Vec::new() }
    }
}

impl Presenter for LoopbackPresenter {
    fn present(
        &mut self,
        trial_index: u32,
        pattern: &RhythmPattern,
        _condition: Condition,
    ) -> Result<Option<RhythmPattern>, PresentError> {
        let seed = self.seed ^ (trial_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let report = run_loopback(pattern, &self.config, seed).map_err(|e| PresentError(e.to_string()))?;
        let onsets = report.onsets.clone();
        self.reports.push(report);
        Ok(Some(onsets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::{builtin_melody, Classifier};
    use crate::model::{Channel, MelodyId, Onset};

    fn one(ch: u32, t: f64, d: f64) -> Onset {
        Onset::new(t, Channel::from_number(ch).unwrap(), d, 1.0)
    }

    #[test]
    fn single_onset_comes_back_on_time() {
        let p = RhythmPattern::new(None, vec![one(2, 200.0, 150.0)]);
        let r = run_loopback(&p, &PipelineConfig::default(), 0).unwrap();
        assert_eq!(r.onsets.len(), 1);
        let o = r.onsets.onsets[0];
        assert_eq!(o.channel.number(), 2);
        assert!((o.time_ms - 200.0).abs() <= 10.0, "{}", o.time_ms);
        assert!((o.duration_ms - 150.0).abs() <= 20.0, "{}", o.duration_ms);
        assert!(r.end_of_stream);
        assert_eq!(r.link.dropped, 0);
    }

    #[test]
    fn silence_gives_no_onsets() {
        let p = RhythmPattern::new(None, vec![Onset::new(0.0, Channel::from_number(1).unwrap(), 100.0, 0.01)]);
        // 0.1 N is under the activation threshold
        let r = run_loopback(&p, &PipelineConfig::default(), 0).unwrap();
        assert!(r.onsets.is_empty());
    }

    #[test]
    fn builtin_melodies_survive_lossless_transport() {
        let cfg = PipelineConfig::default();
        for id in MelodyId::ALL {
            let m = builtin_melody(id);
            let r = run_loopback(&m, &cfg, 1).unwrap();
            assert_eq!(r.onsets.len(), m.len(), "{id}");
            for (got, want) in r.onsets.onsets.iter().zip(&m.onsets) {
                assert_eq!(got.channel, want.channel, "{id}");
                assert!((got.time_ms - want.time_ms).abs() <= 10.0, "{id}: {} vs {}", got.time_ms, want.time_ms);
            }
        }
    }

    #[test]
    fn lossy_transport_still_classifies() {
        let cfg = PipelineConfig {
            faults: LoopbackFaults { loss: 0.05, duplicate: 0.0, jitter_ms: 20.0, base_delay_ms: 0.0 },
            ..PipelineConfig::default()
        };
        let classifier = Classifier::builtin();
        for id in MelodyId::ALL {
            for seed in 0..5 {
                let r = run_loopback(&builtin_melody(id), &cfg, seed).unwrap();
                assert_eq!(classifier.classify(&r.onsets, &MelodyId::ALL).unwrap(), id, "{id} seed {seed}");
            }
        }
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.sensor.sample_rate_hz = 200;
        assert!(matches!(cfg.validate(), Err(PipelineError::RateMismatch { .. })));
    }
}
