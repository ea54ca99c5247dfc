//! Append-only session logs: one json-lines file per session, replayed at startup.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::model::{LogRecord, ReviewDecision, ReviewSession};
use crate::ReviewError;

/// A session and its decisions in submission order.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub session: ReviewSession,
    pub decisions: Vec<ReviewDecision>,
}

#[derive(Debug, Clone)]
pub struct ReviewStore {
    dir: Option<PathBuf>,
}

impl ReviewStore {
    /// Persists under `dir`, creating it if needed.
    pub fn open(dir: &Path) -> Result<Self, ReviewError> {
        fs::create_dir_all(dir).map_err(|e| ReviewError::Store(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
        })
    }

    /// Keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self { dir: None }
    }

    fn path_for(&self, session_id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{session_id}.jsonl")))
    }

    /// Appends one record and syncs it before returning.
    pub fn append(&self, session_id: &str, record: &LogRecord) -> Result<(), ReviewError> {
        let Some(path) = self.path_for(session_id) else {
            return Ok(());
        };
        let mut line = serde_json::to_string(record).map_err(|e| ReviewError::Store(e.to_string()))?;
        line.push('\n');
        let io = |e: std::io::Error| ReviewError::Store(format!("{}: {e}", path.display()));
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        file.write_all(line.as_bytes()).map_err(io)?;
        file.sync_data().map_err(io)
    }

    /// Reads every session log. A torn final line (no trailing newline) is dropped.
    pub fn load_all(&self) -> Result<BTreeMap<String, StoredSession>, ReviewError> {
        let mut out = BTreeMap::new();
        let Some(dir) = &self.dir else {
            return Ok(out);
        };
        let entries = fs::read_dir(dir).map_err(|e| ReviewError::Store(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let stored = read_log(&path)?;
            out.insert(stored.session.session_id.clone(), stored);
        }
        Ok(out)
    }
}

fn read_log(path: &Path) -> Result<StoredSession, ReviewError> {
    let bad = |line: usize, msg: String| ReviewError::Store(format!("{}:{line}: {msg}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(0, e.to_string()))?;
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    if complete.len() < text.len() {
        tracing::warn!(path = %path.display(), "dropping torn final line");
    }
    let mut session: Option<ReviewSession> = None;
    let mut decisions = Vec::new();
    for (i, line) in complete.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: LogRecord = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        match (record, &session) {
            (LogRecord::Session(s), None) => session = Some(s),
            (LogRecord::Session(_), Some(_)) => return Err(bad(i + 1, "second session header".into())),
            (LogRecord::Decision(_), None) => return Err(bad(i + 1, "decision before session header".into())),
            (LogRecord::Decision(d), Some(s)) => {
                if d.session_id != s.session_id {
                    return Err(bad(i + 1, format!("decision for foreign session {}", d.session_id)));
                }
                decisions.push(d);
            }
        }
    }
    let session = session.ok_or_else(|| bad(0, "empty session log".into()))?;
    Ok(StoredSession { session, decisions })
}
