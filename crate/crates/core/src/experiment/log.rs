//! Trial-log CSV.

use std::collections::HashSet;
use std::io::{Read, Write};

use super::{ExperimentError, TrialRecord};

pub const TRIAL_LOG_HEADER: [&str; 5] = ["participant", "condition", "trial_index", "presented", "answered"];

/// Writes records with a header. Pass `header = false` to append to an existing log.
pub fn write_trial_log<W: Write>(out: W, records: &[TrialRecord], header: bool) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| ExperimentError::Io(std::io::Error::other(e));
    if header {
        w.write_record(TRIAL_LOG_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.write_record([
            r.participant.as_str(),
            r.condition.label(),
            &r.trial_index.to_string(),
            &r.presented.to_string(),
            &r.answered.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trial_log<R: Read>(input: R) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut rows = rdr.records();
    let bad = |line: usize, reason: String| ExperimentError::Log { line, reason };
    match rows.next() {
        Some(Ok(h)) if h.iter().eq(TRIAL_LOG_HEADER) => {}
        Some(Ok(h)) => {
            return Err(bad(1, format!("expected header {:?}, found {:?}", TRIAL_LOG_HEADER.join(","), h.iter().collect::<Vec<_>>().join(","))))
        }
        Some(Err(e)) => return Err(bad(1, e.to_string())),
        None => return Err(ExperimentError::EmptyData),
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rows {
        let row = row.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, found {}", row.len())));
        }
        let field = |i: usize| &row[i];
        let participant = field(0).to_string();
        if participant.is_empty() {
            return Err(bad(line, "empty participant".into()));
        }
        let condition = field(1).parse().map_err(|e| bad(line, format!("{e}")))?;
        let trial_index = field(2)
            .parse()
            .map_err(|_| bad(line, format!("trial_index {:?} is not a non-negative integer", field(2))))?;
        let presented = field(3).parse().map_err(|e| bad(line, format!("presented: {e}")))?;
        let answered = field(4).parse().map_err(|e| bad(line, format!("answered: {e}")))?;
        if !seen.insert((participant.clone(), condition, trial_index)) {
            return Err(bad(line, format!("duplicate trial {trial_index} for {participant}/{condition}")));
        }
        records.push(TrialRecord { participant, condition, trial_index, presented, answered });
    }
    if records.is_empty() {
        return Err(ExperimentError::EmptyData);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Condition, MelodyId};

    #[test]
    fn round_trip() {
        let records = vec![
            TrialRecord { participant: "p1".into(), condition: Condition::NoNoise, trial_index: 0, presented: MelodyId::A, answered: MelodyId::B },
            TrialRecord { participant: "p1".into(), condition: Condition::WhiteNoise, trial_index: 0, presented: MelodyId::D, answered: MelodyId::D },
        ];
        let mut buf = Vec::new();
        write_trial_log(&mut buf, &records, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "participant,condition,trial_index,presented,answered\np1,none,0,A,B\np1,white,0,D,D\n");
        assert_eq!(read_trial_log(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            "participant,condition,trial_index,presented,answered\np1,none,0,A,E\n",
            "participant,condition,trial_index,presented,answered\np1,loud,0,A,A\n",
            "participant,condition,trial_index,presented,answered\np1,none,-1,A,A\n",
            "participant,condition,trial_index,presented,answered\np1,none,0,A\n",
        ];
        for text in cases {
            match read_trial_log(text.as_bytes()) {
                Err(ExperimentError::Log { line: 2, .. }) => {}
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let dup = "participant,condition,trial_index,presented,answered\np,none,0,A,A\np,none,0,B,B\n";
        assert!(matches!(read_trial_log(dup.as_bytes()), Err(ExperimentError::Log { line: 3, .. })));
        assert!(matches!(read_trial_log("a,b\n".as_bytes()), Err(ExperimentError::Log { line: 1, .. })));
        assert!(matches!(read_trial_log("".as_bytes()), Err(ExperimentError::EmptyData)));
        let header_only = "participant,condition,trial_index,presented,answered\n";
        assert!(matches!(read_trial_log(header_only.as_bytes()), Err(ExperimentError::EmptyData)));
    }
}
