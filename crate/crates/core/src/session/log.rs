//! Newline-delimited session event log.
//!
//! One JSON object per line. Every record carries the schema version, a UTC
//! millisecond timestamp and the session id next to the event fields.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wire::{ErrorCode, QuestionnaireResponse, RoundPayload, SeatInfo, WireConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    /// First record of every log: the exact game parameters and seat layout.
    SessionOpened {
        config: WireConfig,
        seats: Vec<SeatInfo>,
    },
    Joined {
        player: usize,
        name: String,
        is_bot: bool,
    },
    Disconnected {
        player: usize,
    },
    RoundStarted {
        round: usize,
    },
    ContributionSubmitted {
        player: usize,
        round: usize,
        amount_cents: i64,
        timed_out: bool,
    },
    RoundRevealed(RoundPayload),
    PersonaEvent {
        player: usize,
        action_id: String,
    },
    QuestionnaireSubmitted {
        player: usize,
        answers: QuestionnaireResponse,
    },
    GameOver {
        final_scores_milli: Vec<i64>,
    },
    SessionClosed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Error {
        code: ErrorCode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        player: Option<usize>,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub v: u32,
    pub ts: u64,
    pub session: String,
    #[serde(flatten)]
    pub event: SessionEvent,
}

impl LogRecord {
    pub fn new(ts: u64, session: impl Into<String>, event: SessionEvent) -> Self {
        LogRecord {
            v: SCHEMA_VERSION,
            ts,
            session: session.into(),
            event,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log sink unavailable: {0}")]
    SinkUnavailable(#[source] io::Error),
}

/// Serialize `record` as one line and flush it before returning.
pub fn append_log<W: Write + ?Sized>(sink: &mut W, record: &LogRecord) -> Result<(), LogError> {
    let mut line = serde_json::to_vec(record).expect("log records always serialize");
    line.push(b'\n');
    sink.write_all(&line).map_err(LogError::SinkUnavailable)?;
    sink.flush().map_err(LogError::SinkUnavailable)
}

/// Append-only log file for one session.
pub struct EventLog {
    file: File,
}

impl EventLog {
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(LogError::SinkUnavailable)?;
        Ok(EventLog { file })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        append_log(&mut self.file, record)
    }
}

/// Render records exactly as they would be written to a log file.
pub fn to_ndjson(records: &[LogRecord]) -> String {
    let mut buf = Vec::new();
    for r in records {
        append_log(&mut buf, r).expect("writing to memory");
    }
    String::from_utf8(buf).expect("json is utf-8")
}
