//! Receive-side jitter buffer.
//!
//! Frames are released in sequence order once `timestamp + target_latency`
//! (mapped onto the receiver clock) has passed. A missing frame is concealed
//! by repeating the last released frame until the gap exceeds the timeout,
//! after which the buffer reports silence.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use thiserror::Error;

use super::codec::FrameFlags;
use crate::model::{ForceFrame, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterBufferConfig {
    pub target_latency_ms: u32,
    pub gap_timeout_ms: u32,
    pub capacity_frames: usize,
}

impl Default for JitterBufferConfig {
    fn default() -> Self {
        JitterBufferConfig {
            target_latency_ms: 40,
            gap_timeout_ms: 100,
            capacity_frames: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JitterConfigError {
    #[error("target latency {target} ms must be below the gap timeout {timeout} ms")]
    LatencyNotBelowTimeout { target: u32, timeout: u32 },
    #[error("capacity {capacity} frames is below the {required} needed for twice the target latency")]
    CapacityTooSmall { capacity: usize, required: usize },
}

impl JitterBufferConfig {
    /// Checks the config against the frame rate it will carry.
    pub fn validate(&self, frame_rate_hz: u32) -> Result<(), JitterConfigError> {
        if self.target_latency_ms >= self.gap_timeout_ms {
            return Err(JitterConfigError::LatencyNotBelowTimeout {
                target: self.target_latency_ms,
                timeout: self.gap_timeout_ms,
            });
        }
        let required =
            (2 * self.target_latency_ms as u64 * frame_rate_hz as u64).div_ceil(1000) as usize;
        if self.capacity_frames < required.max(1) {
            return Err(JitterConfigError::CapacityTooSmall {
                capacity: self.capacity_frames,
                required,
            });
        }
        Ok(())
    }

    fn target_latency_us(&self) -> u64 {
        self.target_latency_ms as u64 * 1000
    }

    fn gap_timeout_us(&self) -> u64 {
        self.gap_timeout_ms as u64 * 1000
    }
}

/// How sender timestamps map onto the receiver clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockSync {
    /// Both ends read the same monotonic clock (in-process loopback).
    #[default]
    Shared,
    /// Offset fixed from the first arrival; used across processes.
    FirstArrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Playout {
    /// The next frame in sequence.
    Frame(ForceFrame),
    /// The previous frame repeated to conceal a gap.
    Held(ForceFrame),
    /// All-zero output after a long gap (or before the first frame is due).
    Silence,
    /// Nothing has ever arrived.
    Stalled,
}

impl Playout {
    pub fn forces(&self) -> [f64; CHANNELS] {
        match self {
            Playout::Frame(f) | Playout::Held(f) => f.forces,
            Playout::Silence | Playout::Stalled => [0.0; CHANNELS],
        }
    }

    pub fn frame(&self) -> Option<&ForceFrame> {
        match self {
            Playout::Frame(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct JitterStats {
    pub received: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub late: u64,
    pub overflow: u64,
    pub malformed: u64,
    pub played: u64,
    pub held: u64,
    pub silent: u64,
}

#[derive(Debug)]
pub struct JitterBuffer {
    config: JitterBufferConfig,
    sync: ClockSync,
    offset_us: Option<i64>,
    pending: BTreeMap<u32, (ForceFrame, FrameFlags)>,
    last: Option<(ForceFrame, u64)>,
    end_of_stream: bool,
    stats: JitterStats,
}

impl JitterBuffer {
    pub fn new(config: JitterBufferConfig) -> Self {
        Self::with_sync(config, ClockSync::Shared)
    }

    pub fn with_sync(config: JitterBufferConfig, sync: ClockSync) -> Self {
        JitterBuffer {
            config,
            sync,
            offset_us: None,
            pending: BTreeMap::new(),
            last: None,
            end_of_stream: false,
            stats: JitterStats::default(),
        }
    }

    pub fn config(&self) -> &JitterBufferConfig {
        &self.config
    }

    pub fn stats(&self) -> JitterStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// True once the frame flagged last-of-stream has been released.
    pub fn end_of_stream(&self) -> bool {
        self.end_of_stream
    }

    /// Counts a datagram that failed to decode.
    pub fn note_malformed(&mut self) {
        self.stats.malformed += 1;
    }

    fn playout_time(&self, frame: &ForceFrame) -> u64 {
        let offset = self.offset_us.unwrap_or(0);
        let local = frame.timestamp_us as i64 + offset;
        local.max(0) as u64 + self.config.target_latency_us()
    }

    pub fn push(&mut self, frame: ForceFrame, arrival_us: u64) -> bool {
        self.push_with_flags(frame, FrameFlags::NONE, arrival_us)
    }

    /// Returns whether the frame was queued.
    pub fn push_with_flags(&mut self, frame: ForceFrame, flags: FrameFlags, arrival_us: u64) -> bool {
        self.stats.received += 1;
        if self.offset_us.is_none() {
            self.offset_us = Some(match self.sync {
                ClockSync::Shared => 0,
                ClockSync::FirstArrival => arrival_us as i64 - frame.timestamp_us as i64,
            });
        }
        if self.pending.contains_key(&frame.seq) {
            self.stats.duplicates += 1;
            return false;
        }
        if let Some((last, _)) = &self.last {
            if frame.seq <= last.seq {
                if frame.seq == last.seq {
                    self.stats.duplicates += 1;
                } else {
                    self.stats.late += 1;
                }
                return false;
            }
        }
        if self.playout_time(&frame) < arrival_us {
            self.stats.late += 1;
            return false;
        }
        if self.pending.len() >= self.config.capacity_frames {
            let oldest = *self.pending.keys().next().expect("capacity is non-zero");
            if frame.seq < oldest {
                self.stats.overflow += 1;
                return false;
            }
            self.pending.remove(&oldest);
            self.stats.overflow += 1;
        }
        self.pending.insert(frame.seq, (frame, flags));
        self.stats.accepted += 1;
        true
    }

    pub fn pop(&mut self, now_us: u64) -> Playout {
        if self.offset_us.is_none() {
            return Playout::Stalled;
        }
        if let Some((&seq, (frame, _))) = self.pending.iter().next() {
            let due = self.playout_time(frame);
            if due <= now_us {
                let (frame, flags) = self.pending.remove(&seq).expect("present");
                self.last = Some((frame, due));
                self.end_of_stream |= flags.last_of_stream;
                self.stats.played += 1;
                return Playout::Frame(frame);
            }
        }
        match self.last {
            Some((frame, due)) if now_us.saturating_sub(due) <= self.config.gap_timeout_us() => {
                self.stats.held += 1;
                Playout::Held(frame)
            }
            _ => {
                self.stats.silent += 1;
                Playout::Silence
            }
        }
    }
}

/// Mutex-wrapped buffer shared by a network receive thread and a display tick
/// loop.
#[derive(Debug, Clone)]
pub struct SharedJitterBuffer(Arc<Mutex<JitterBuffer>>);

impl SharedJitterBuffer {
    pub fn new(buffer: JitterBuffer) -> Self {
        SharedJitterBuffer(Arc::new(Mutex::new(buffer)))
    }

    pub fn lock(&self) -> MutexGuard<'_, JitterBuffer> {
        self.0.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn push_with_flags(&self, frame: ForceFrame, flags: FrameFlags, arrival_us: u64) -> bool {
        self.lock().push_with_flags(frame, flags, arrival_us)
    }

    pub fn pop(&self, now_us: u64) -> Playout {
        self.lock().pop(now_us)
    }
}
