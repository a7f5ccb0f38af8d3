//! Sequenced session events, written as newline-delimited JSON for replay.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStarted,
    Reading,
    Bubbles,
    BubblePlaced,
    DeviceState,
    Avatar,
    CommandRejected,
    Completion,
    SessionEnded,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub t: f64,
    pub kind: EventKind,
    pub payload: Value,
}

/// Append-only log with gapless sequence numbers starting at 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, t: f64, kind: EventKind, payload: Value) -> u64 {
        let seq = self.last_seq() + 1;
        self.events.push(Event { seq, t, kind, payload });
        seq
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with `seq > since`.
    pub fn since(&self, since: u64) -> &[Event] {
        let start = (since as usize).min(self.events.len());
        &self.events[start..]
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<Event>, _>>()?;
        Ok(Self { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sequence_is_gapless_and_replayable() {
        let mut log = EventLog::default();
        for i in 0..5 {
            log.push(i as f64, EventKind::Reading, json!({ "i": i }));
        }
        let seqs: Vec<u64> = log.events().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3, 4, 5]);
        assert_eq!(log.since(3)[0].seq, 4);
        assert!(log.since(5).is_empty());
        assert!(log.since(99).is_empty());
        let back = EventLog::from_ndjson(&log.to_ndjson()).unwrap();
        assert_eq!(back, log);
    }
}
