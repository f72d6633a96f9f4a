use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{SessionError, Verdict};
use crate::inference::TestConfig;
use crate::items::QuestionItem;
use crate::stimulus::{IllusionSpec, SpecHash};

/// One line of a session log. Records appear in the order
/// `created`, then `item_issued`/`answered` pairs, then at most one
/// `verdict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        subject_id: String,
        config: TestConfig,
        ts_ms: u64,
    },
    ItemIssued {
        seq: u32,
        spec_hash: SpecHash,
        spec: IllusionSpec,
        item: QuestionItem,
        /// Registry draws spent before a fresh instance was found.
        attempts: u32,
        ts_ms: u64,
    },
    Answered {
        item_id: String,
        /// Absent when the agent timed out or replied malformedly.
        choice: Option<usize>,
        latency_ms: u64,
        ts_ms: u64,
    },
    Verdict {
        verdict: Verdict,
        ts_ms: u64,
    },
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Destination for session events.
pub trait EventSink: Send {
    fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError>;
}

/// Discards events.
pub struct NullSink;

impl EventSink for NullSink {
    fn append(&mut self, _: &SessionEvent) -> Result<(), SessionError> {
        Ok(())
    }
}

/// Keeps serialized lines in memory; clones share the buffer.
#[derive(Clone, Default)]
pub struct MemorySink(Arc<Mutex<Vec<String>>>);

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> Vec<String> {
        self.0.lock().unwrap().clone()
    }

    /// The log as it would appear on disk.
    pub fn text(&self) -> String {
        self.lines().iter().map(|l| format!("{l}\n")).collect()
    }
}

impl EventSink for MemorySink {
    fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        let line = serde_json::to_string(event).map_err(|e| SessionError::Storage(e.to_string()))?;
        self.0.lock().unwrap().push(line);
        Ok(())
    }
}

/// `<data_dir>/<session_id>.jsonl`, appended and flushed per event.
pub struct FileSink {
    path: PathBuf,
    file: File,
}

impl FileSink {
    pub fn log_path(data_dir: &Path, session_id: &str) -> PathBuf {
        data_dir.join(format!("{session_id}.jsonl"))
    }

    /// Appends to an existing log or starts a new one.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| SessionError::Storage(format!("{}: {e}", path.display())))?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventSink for FileSink {
    fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        let mut line = serde_json::to_string(event).map_err(|e| SessionError::Storage(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| SessionError::Storage(format!("{}: {e}", self.path.display())))
    }
}

/// Splits log text into parsed events. A final line without a newline that
/// does not parse is treated as a torn write and dropped.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, SessionError> {
    let mut out = Vec::new();
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.split('\n').collect();
    let last = lines.len() - 1;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SessionEvent>(line) {
            Ok(ev) => out.push(ev),
            Err(_) if i == last && !complete => {}
            Err(e) => return Err(SessionError::CorruptLog { line: i + 1, reason: e.to_string() }),
        }
    }
    Ok(out)
}
