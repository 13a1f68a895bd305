//! Append-only session log: `<ms>\t<EVENT>\t<payload>` per line.

use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    StimulusStarted,
    StageClassified,
    StimulusStopped,
    ExperiencePredicted,
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Timestamps are session-relative milliseconds derived from the data, not
/// the wall clock, so replays produce identical logs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    entries: Vec<(u64, LogEvent, String)>,
}

impl SessionLog {
    pub fn push(&mut self, at_ms: u64, event: LogEvent, payload: String) {
        self.entries.push((at_ms, event, payload));
    }

    pub fn entries(&self) -> &[(u64, LogEvent, String)] {
        &self.entries
    }

    pub fn events(&self, event: LogEvent) -> impl Iterator<Item = &(u64, LogEvent, String)> {
        self.entries.iter().filter(move |e| e.1 == event)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (ms, ev, payload) in &self.entries {
            writeln!(out, "{ms}\t{ev}\t{payload}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("log is UTF-8")
    }
}
