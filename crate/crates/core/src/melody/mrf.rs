//! MRF1 rhythm files.
//!
//! ```text
//! MRF1
//! # comment
//! time_ms channel duration_ms intensity
//! ```

use std::fmt::Write as _;

use super::MelodyError;
use crate::model::{Channel, Onset, OnsetProblem, RhythmPattern};

const HEADER: &str = "MRF1";

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(body, _)| body).trim()
}

pub fn parse_rhythm_file(text: &str) -> Result<RhythmPattern, MelodyError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, first)) if first.trim() == HEADER => {}
        _ => return Err(MelodyError::BadFormat { line: 1 }),
    }
    let mut onsets: Vec<Onset> = Vec::new();
    let mut line_of = Vec::new();
    for (line, raw) in lines {
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(MelodyError::BadLine {
                line,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let number = |i: usize, name: &str| {
            fields[i].parse::<f64>().map_err(|_| MelodyError::BadLine {
                line,
                reason: format!("{name} {:?} is not a number", fields[i]),
            })
        };
        let time_ms = number(0, "time")?;
        let channel = fields[1]
            .parse::<u32>()
            .ok()
            .and_then(Channel::from_number)
            .ok_or_else(|| MelodyError::BadChannel {
                line,
                value: fields[1].to_string(),
            })?;
        let duration_ms = number(2, "duration")?;
        let intensity = number(3, "intensity")?;
        if onsets.last().is_some_and(|prev| time_ms < prev.time_ms) {
            return Err(MelodyError::BadOrder { line });
        }
        onsets.push(Onset::new(time_ms, channel, duration_ms, intensity));
        line_of.push(line);
    }
    let pattern = RhythmPattern::new(None, onsets);
    if let Err(e) = pattern.validate() {
        let issue = &e.issues[0];
        let line = line_of[issue.index];
        return Err(match issue.problem {
            OnsetProblem::OutOfOrder => MelodyError::BadOrder { line },
            ref problem => MelodyError::BadLine {
                line,
                reason: problem.to_string(),
            },
        });
    }
    Ok(pattern)
}

/// Canonical MRF1 text: header, then one onset per line, no comments.
pub fn serialize_rhythm(pattern: &RhythmPattern) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for o in &pattern.onsets {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            o.time_ms, o.channel, o.duration_ms, o.intensity
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_onset() {
        let p = parse_rhythm_file("MRF1\n0 1 100 1.0\n").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.onsets[0].channel.number(), 1);
        assert_eq!(p.onsets[0].duration_ms, 100.0);
    }

    #[test]
    fn bad_channel_names_line() {
        assert_eq!(
            parse_rhythm_file("MRF1\n0 4 100 1.0\n"),
            Err(MelodyError::BadChannel {
                line: 2,
                value: "4".into()
            })
        );
    }

    #[test]
    fn bad_header() {
        assert_eq!(
            parse_rhythm_file("MRF2\n0 1 100 1\n"),
            Err(MelodyError::BadFormat { line: 1 })
        );
        assert_eq!(parse_rhythm_file(""), Err(MelodyError::BadFormat { line: 1 }));
    }

    #[test]
    fn decreasing_time() {
        let text = "MRF1\n# intro\n100 1 50 1\n\n50 2 50 1\n";
        assert_eq!(parse_rhythm_file(text), Err(MelodyError::BadOrder { line: 5 }));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "MRF1\n# whole line\n\n0 2 80 0.5 # trailing\n   \n200 3 80 1\n";
        let p = parse_rhythm_file(text).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(serialize_rhythm(&p), "MRF1\n0 2 80 0.5\n200 3 80 1\n");
    }

    #[test]
    fn invariant_violations_name_line() {
        let overlap = "MRF1\n0 1 100 1\n50 1 10 1\n";
        assert_eq!(parse_rhythm_file(overlap).unwrap_err().line(), Some(3));
        let zero = "MRF1\n0 1 0 1\n";
        assert!(matches!(parse_rhythm_file(zero), Err(MelodyError::BadLine { line: 2, .. })));
        let fields = "MRF1\n0 1 100\n";
        assert!(matches!(parse_rhythm_file(fields), Err(MelodyError::BadLine { line: 2, .. })));
    }

    fn onset_lines() -> impl Strategy<Value = Vec<(u32, u32, u32, u32)>> {
        prop::collection::vec((0u32..500, 1u32..=3, 1u32..200, 1u32..=100), 0..20)
    }

    proptest! {
        #[test]
        fn serialize_of_parse_is_normal_form(rows in onset_lines(), comments in any::<bool>()) {
            // lay onsets out sequentially so they never overlap
            let mut t = 0u32;
            let mut text = String::from("MRF1\n");
            let mut normal = String::from("MRF1\n");
            for (gap, ch, dur, pct) in rows {
                t += gap;
                let intensity = pct as f64 / 100.0;
                if comments {
                    text.push_str("# note\n");
                }
                text.push_str(&format!("  {t}\t{ch}  {dur} {intensity:.2}{}\n", if comments { " # x" } else { "" }));
                normal.push_str(&format!("{t} {ch} {dur} {intensity}\n"));
                t += dur;
            }
            let parsed = parse_rhythm_file(&text).unwrap();
            prop_assert_eq!(serialize_rhythm(&parsed), normal.clone());
            prop_assert_eq!(parse_rhythm_file(&normal).unwrap(), parsed);
        }
    }
}
