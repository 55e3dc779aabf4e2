//! Recorded display states, CSV export and onset re-extraction.

use std::io::{Read, Write};

use thiserror::Error;

use super::kinematics::Point;
use super::sim::LinkageState;
use crate::model::{Channel, Onset, RhythmPattern, CHANNELS};

pub const CSV_HEADER: [&str; 8] = [
    "tick",
    "channel",
    "theta1_rad",
    "theta2_rad",
    "x_mm",
    "y_mm",
    "in_contact",
    "depth_mm",
];

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("history csv: {0}")]
    Format(String),
}

/// Per-tick snapshots of all three linkages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateHistory {
    pub tick_rate_hz: u32,
    pub ticks: Vec<[LinkageState; CHANNELS]>,
}

impl StateHistory {
    pub fn new(tick_rate_hz: u32) -> Self {
        StateHistory {
            tick_rate_hz,
            ticks: Vec::new(),
        }
    }

    pub fn push(&mut self, states: [LinkageState; CHANNELS]) {
        self.ticks.push(states);
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn tick_period_ms(&self) -> f64 {
        1000.0 / self.tick_rate_hz as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HistoryError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for (tick, states) in self.ticks.iter().enumerate() {
            for (i, s) in states.iter().enumerate() {
                w.write_record([
                    tick.to_string(),
                    (i + 1).to_string(),
                    format!("{:.9}", s.theta1_rad),
                    format!("{:.9}", s.theta2_rad),
                    format!("{:.6}", s.effector_mm.x),
                    format!("{:.6}", s.effector_mm.y),
                    s.in_contact.to_string(),
                    format!("{:.6}", s.contact_depth_mm),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a history written by [`StateHistory::write_csv`]. The tick rate
    /// is not stored in the file and must be supplied.
    pub fn read_csv<R: Read>(reader: R, tick_rate_hz: u32) -> Result<Self, HistoryError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(HistoryError::Format(format!("unexpected header {header:?}")));
        }
        let mut history = StateHistory::new(tick_rate_hz);
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let bad = |what: &str| HistoryError::Format(format!("row {}: bad {what}", line + 2));
            let num = |i: usize, what: &str| -> Result<f64, HistoryError> {
                record[i].parse::<f64>().map_err(|_| bad(what))
            };
            let tick: usize = record[0].parse().map_err(|_| bad("tick"))?;
            let channel = record[1]
                .parse::<u32>()
                .ok()
                .and_then(Channel::from_number)
                .ok_or_else(|| bad("channel"))?;
            let state = LinkageState {
                theta1_rad: num(2, "theta1_rad")?,
                theta2_rad: num(3, "theta2_rad")?,
                effector_mm: Point::new(num(4, "x_mm")?, num(5, "y_mm")?),
                in_contact: record[6].parse().map_err(|_| bad("in_contact"))?,
                contact_depth_mm: num(7, "depth_mm")?,
                clamped: false,
            };
            if tick == history.ticks.len() {
                history.ticks.push([state; CHANNELS]);
            } else if tick + 1 != history.ticks.len() {
                return Err(bad("tick order"));
            }
            history.ticks[tick][channel.index()] = state;
        }
        Ok(history)
    }
}

/// One onset per maximal run of in-contact ticks on each channel. Times are
/// tick-aligned from the start of the history; intensity is the peak depth
/// relative to `depth_max_mm`.
pub fn extract_onsets(history: &StateHistory, depth_max_mm: f64) -> RhythmPattern {
    let period = history.tick_period_ms();
    let mut onsets = Vec::new();
    for ch in Channel::ALL {
        let mut run: Option<(usize, f64)> = None;
        let close = |start: usize, end: usize, peak: f64, onsets: &mut Vec<Onset>| {
            onsets.push(Onset::new(
                start as f64 * period,
                ch,
                (end - start) as f64 * period,
                (peak / depth_max_mm).clamp(1e-3, 1.0),
            ));
        };
        for (tick, states) in history.ticks.iter().enumerate() {
            let s = &states[ch.index()];
            match (&mut run, s.in_contact) {
                (None, true) => run = Some((tick, s.contact_depth_mm)),
                (Some((_, peak)), true) => *peak = peak.max(s.contact_depth_mm),
                (Some((start, peak)), false) => {
                    close(*start, tick, *peak, &mut onsets);
                    run = None;
                }
                (None, false) => {}
            }
        }
        if let Some((start, peak)) = run {
            close(start, history.ticks.len(), peak, &mut onsets);
        }
    }
    onsets.sort_by(|a, b| {
        a.time_ms
            .total_cmp(&b.time_ms)
            .then(a.channel.cmp(&b.channel))
    });
    RhythmPattern::new(None, onsets)
}
