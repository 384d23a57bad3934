use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::pipeline::AnswerRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    /// Milliseconds since the Unix epoch; strictly increasing within a session.
    pub timestamp_ms: u64,
    pub record: AnswerRecord,
}

/// Append-only log of the asks made under one session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub entries: Vec<SessionEntry>,
}

impl SessionLog {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn append(&mut self, record: AnswerRecord, now_ms: u64) {
        let timestamp_ms = match self.entries.last() {
            Some(last) if now_ms <= last.timestamp_ms => last.timestamp_ms + 1,
            _ => now_ms,
        };
        self.entries.push(SessionEntry {
            timestamp_ms,
            record,
        });
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, SessionLog>>,
}

impl SessionStore {
    pub fn append(&self, session_id: &str, record: AnswerRecord) {
        let mut sessions = self.sessions.lock().unwrap();
        sessions
            .entry(session_id.to_string())
            .or_insert_with(|| SessionLog::new(session_id))
            .append(record, now_ms());
    }

    pub fn get(&self, session_id: &str) -> Option<SessionLog> {
        self.sessions.lock().unwrap().get(session_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ImageRef;
    use crate::pipeline::{ModeApplied, StageTimings};

    fn record() -> AnswerRecord {
        AnswerRecord {
            image: ImageRef::path("a", "a.jpg"),
            question_raw: "Q?".into(),
            question_entry: None,
            modified_question: "Q?".into(),
            raw_answer: "x".into(),
            match_result: None,
            final_answer: "x".into(),
            mode_applied: ModeApplied::FallbackRaw,
            flagged: true,
            timings: StageTimings::default(),
        }
    }

    #[test]
    fn timestamps_strictly_increase() {
        let mut log = SessionLog::new("s");
        log.append(record(), 100);
        log.append(record(), 100);
        log.append(record(), 50);
        log.append(record(), 500);
        let ts: Vec<u64> = log.entries.iter().map(|e| e.timestamp_ms).collect();
        assert_eq!(ts, vec![100, 101, 102, 500]);
    }
}
