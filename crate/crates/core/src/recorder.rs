//! Touch-sensitive recorder model.
//!
//! Each pad is a force sensitive resistor read by a microcontroller ADC. The
//! transfer curve is linear in force above an activation threshold, which is
//! the usual conductance-vs-force approximation for FSRs. Frames are emitted
//! on a fixed sampling grid; a channel holds the force of its latest unreleased
//! press.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{Channel, Clock, ForceFrame, PatternError, RhythmPattern, CHANNELS, FULL_SCALE_N};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("force {0} N is negative or not a number")]
    NegativeForce(f64),
    #[error("adc reading {counts} outside 0..={max}")]
    CountsOutOfRange { counts: u32, max: u32 },
    #[error("sample rate {0} Hz outside 10..=1000")]
    SampleRate(u32),
    #[error("adc resolution {0} bits outside 8..=16")]
    AdcBits(u8),
    #[error("activation threshold {0} N must be within [0, 10)")]
    Threshold(f64),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub sample_rate_hz: u32,
    pub adc_bits: u8,
    pub activation_threshold_n: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            sample_rate_hz: 100,
            adc_bits: 12,
            activation_threshold_n: 0.2,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(10..=1000).contains(&self.sample_rate_hz) {
            return Err(SensorError::SampleRate(self.sample_rate_hz));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(SensorError::AdcBits(self.adc_bits));
        }
        if !(0.0..FULL_SCALE_N).contains(&self.activation_threshold_n) {
            return Err(SensorError::Threshold(self.activation_threshold_n));
        }
        Ok(())
    }

    pub fn adc_max(&self) -> u32 {
        (1u32 << self.adc_bits) - 1
    }

    /// Force represented by one ADC count.
    pub fn adc_step_n(&self) -> f64 {
        FULL_SCALE_N / self.adc_max() as f64
    }

    /// Timestamp of sample `index` relative to the stream origin.
    pub fn sample_offset_us(&self, index: u64) -> u64 {
        index * 1_000_000 / self.sample_rate_hz as u64
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz as f64
    }
}

/// Sensor transfer curve: newtons to ADC counts.
pub fn fsr_response(force_n: f64, config: &SensorConfig) -> Result<u32, SensorError> {
    if force_n.is_nan() || force_n < 0.0 {
        return Err(SensorError::NegativeForce(force_n));
    }
    if force_n < config.activation_threshold_n {
        return Ok(0);
    }
    let max = config.adc_max();
    // f64::round rounds half away from zero.
    let counts = (max as f64 * force_n.min(FULL_SCALE_N) / FULL_SCALE_N).round();
    Ok(counts as u32)
}

/// Inverse of [`fsr_response`] on the reconstruction side.
pub fn adc_to_force(counts: u32, config: &SensorConfig) -> Result<f64, SensorError> {
    let max = config.adc_max();
    if counts > max {
        return Err(SensorError::CountsOutOfRange { counts, max });
    }
    Ok(FULL_SCALE_N * counts as f64 / max as f64)
}

/// Force after a trip through the sensor and ADC.
pub fn quantize(force_n: f64, config: &SensorConfig) -> Result<f64, SensorError> {
    adc_to_force(fsr_response(force_n, config)?, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TapKind {
    Press,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapEvent {
    pub channel: Channel,
    pub kind: TapKind,
    /// Newtons for a press, zero for a release.
    pub force_n: f64,
    pub timestamp_us: u64,
}

impl TapEvent {
    pub fn press(channel: Channel, force_n: f64, timestamp_us: u64) -> Self {
        TapEvent {
            channel,
            kind: TapKind::Press,
            force_n,
            timestamp_us,
        }
    }

    pub fn release(channel: Channel, timestamp_us: u64) -> Self {
        TapEvent {
            channel,
            kind: TapKind::Release,
            force_n: 0.0,
            timestamp_us,
        }
    }
}

/// Turns tap events into frames on a fixed sampling grid.
///
/// Events are queued with [`TapSampler::push`]; [`TapSampler::poll`] emits
/// every frame whose grid time is at or before `now`. An event takes effect
/// at the first grid time at or after its timestamp. A second press on a held
/// channel and a release on an idle channel are ignored.
#[derive(Debug)]
pub struct TapSampler {
    config: SensorConfig,
    origin_us: u64,
    next_index: u64,
    seq: u32,
    held: [Option<f64>; CHANNELS],
    pending: VecDeque<TapEvent>,
}

impl TapSampler {
    pub fn new(config: SensorConfig, origin_us: u64) -> Result<Self, SensorError> {
        config.validate()?;
        Ok(TapSampler {
            config,
            origin_us,
            next_index: 0,
            seq: 0,
            held: [None; CHANNELS],
            pending: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &SensorConfig {
        &self.config
    }

    pub fn push(&mut self, event: TapEvent) {
        // keep pending sorted; events normally arrive in order so this is a push_back
        let pos = self
            .pending
            .iter()
            .rposition(|e| e.timestamp_us <= event.timestamp_us)
            .map_or(0, |p| p + 1);
        self.pending.insert(pos, event);
    }

    /// Grid time of the next frame to be emitted.
    pub fn next_frame_time_us(&self) -> u64 {
        self.origin_us + self.config.sample_offset_us(self.next_index)
    }

    pub fn is_holding(&self, channel: Channel) -> bool {
        self.held[channel.index()].is_some()
    }

    fn apply(&mut self, event: TapEvent) {
        let slot = &mut self.held[event.channel.index()];
        match event.kind {
            TapKind::Press if slot.is_none() => {
                *slot = Some(event.force_n.clamp(0.0, FULL_SCALE_N));
            }
            TapKind::Release => *slot = None,
            TapKind::Press => {}
        }
    }

    /// Emits all frames due at or before `now_us`.
    pub fn poll(&mut self, now_us: u64) -> Vec<ForceFrame> {
        let mut out = Vec::new();
        while self.next_frame_time_us() <= now_us {
            out.push(self.emit());
        }
        out
    }

    pub fn poll_clock(&mut self, clock: &impl Clock) -> Vec<ForceFrame> {
        self.poll(clock.now_us())
    }

    fn emit(&mut self) -> ForceFrame {
        let t = self.next_frame_time_us();
        while self.pending.front().is_some_and(|e| e.timestamp_us <= t) {
            let e = self.pending.pop_front().expect("checked non-empty");
            self.apply(e);
        }
        let mut forces = [0.0; CHANNELS];
        for (force, held) in forces.iter_mut().zip(self.held) {
            if let Some(f) = held {
                // the held force was clamped into range on press
                *force = quantize(f, &self.config).unwrap_or(0.0);
            }
        }
        let frame = ForceFrame::new(self.seq, t, forces);
        self.seq = self.seq.wrapping_add(1);
        self.next_index += 1;
        frame
    }
}

/// Offline sampling of an event list over `[origin, origin + duration]`.
pub fn sample_taps(
    events: impl IntoIterator<Item = TapEvent>,
    config: &SensorConfig,
    origin_us: u64,
    duration_us: u64,
) -> Result<Vec<ForceFrame>, SensorError> {
    let mut sampler = TapSampler::new(*config, origin_us)?;
    for e in events {
        sampler.push(e);
    }
    Ok(sampler.poll(origin_us + duration_us))
}

/// Scripted playback: renders a rhythm pattern as a deterministic frame list
/// starting at timestamp zero.
///
/// An onset drives `intensity * 10 N` on its channel for every frame whose
/// timestamp falls in `[time, time + duration)`. The list ends with one
/// all-zero frame after the last onset.
pub fn encode_pattern(
    pattern: &RhythmPattern,
    config: &SensorConfig,
) -> Result<Vec<ForceFrame>, SensorError> {
    config.validate()?;
    pattern.validate()?;
    let period_us = 1_000_000.0 / config.sample_rate_hz as f64;
    let end_us = (pattern.end_ms() * 1000.0).round();
    let active_frames = (end_us / period_us).ceil() as u64;
    let total = active_frames + 1;

    let spans: Vec<(usize, u64, u64, f64)> = pattern
        .onsets
        .iter()
        .map(|o| {
            (
                o.channel.index(),
                (o.time_ms * 1000.0).round() as u64,
                (o.end_ms() * 1000.0).round() as u64,
                o.intensity * FULL_SCALE_N,
            )
        })
        .collect();

    let mut frames: Vec<ForceFrame> = (0..total)
        .map(|i| ForceFrame::zero(i as u32, config.sample_offset_us(i)))
        .collect();
    for &(ch, start, end, force) in &spans {
        let first = frames.partition_point(|f| f.timestamp_us < start);
        for frame in frames[first..].iter_mut().take_while(|f| f.timestamp_us < end) {
            frame.forces[ch] = force;
        }
    }
    Ok(frames)
}
