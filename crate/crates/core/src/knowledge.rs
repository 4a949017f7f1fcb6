//! Self-learning store of past translations.
//!
//! State is the fold of an append-only JSON-lines journal. Every translation
//! is recorded as a pending entry; user verdicts move it to accepted or
//! rejected. Accepted entries are replayed for the same normalized query,
//! rejected ones become a blocklist for the next translation.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resolver::ResolvedQuery;
use crate::sqlgen::SqlText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Pending,
    Accepted,
    Rejected,
}

impl EntryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryStatus::Pending => "pending",
            EntryStatus::Accepted => "accepted",
            EntryStatus::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl FromStr for Verdict {
    type Err = KnowledgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "accept" => Ok(Verdict::Accept),
            "reject" => Ok(Verdict::Reject),
            _ => Err(KnowledgeError::BadVerdict(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KnowledgeEntry {
    pub id: String,
    pub key: String,
    pub sql: SqlText,
    pub resolved: ResolvedQuery,
    pub accepts: u32,
    pub rejects: u32,
    pub status: EntryStatus,
    /// Free-text feedback, kept verbatim.
    pub notes: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("empty-query: nothing left after normalization")]
    EmptyAfterNormalization,
    #[error("unknown-entry: no knowledge entry '{0}'")]
    UnknownEntry(String),
    #[error("bad-verdict: '{0}' (expected accept or reject)")]
    BadVerdict(String),
    #[error("storage-io on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt journal {path} line {line}: {reason}")]
    CorruptJournal {
        path: String,
        line: usize,
        reason: String,
    },
}

impl KnowledgeError {
    pub fn code(&self) -> &'static str {
        match self {
            KnowledgeError::EmptyAfterNormalization => "empty-query",
            KnowledgeError::UnknownEntry(_) => "unknown-entry",
            KnowledgeError::BadVerdict(_) => "bad-verdict",
            KnowledgeError::Io { .. } => "storage-io",
            KnowledgeError::CorruptJournal { .. } => "corrupt-journal",
        }
    }
}

/// Lowercase, drop terminal punctuation, collapse whitespace.
pub fn normalize_query(raw: &str) -> Result<String, KnowledgeError> {
    let lower = raw.to_lowercase();
    let trimmed = lower
        .trim()
        .trim_end_matches(|c: char| matches!(c, '.' | ',' | ';' | '?' | '!') || c.is_whitespace());
    let key = trimmed.split_whitespace().collect::<Vec<_>>().join(" ");
    if key.is_empty() {
        return Err(KnowledgeError::EmptyAfterNormalization);
    }
    Ok(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum JournalEvent {
    Record {
        id: String,
        key: String,
        sql: SqlText,
        resolved: Box<ResolvedQuery>,
        timestamp: DateTime<Utc>,
    },
    Feedback {
        id: String,
        verdict: Verdict,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        timestamp: DateTime<Utc>,
    },
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub struct KnowledgeStore {
    path: Option<PathBuf>,
    entries: Vec<KnowledgeEntry>,
    clock: Clock,
}

impl std::fmt::Debug for KnowledgeStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeStore")
            .field("path", &self.path)
            .field("entries", &self.entries.len())
            .finish()
    }
}

fn apply(entries: &mut Vec<KnowledgeEntry>, event: JournalEvent) -> Result<(), KnowledgeError> {
    match event {
        JournalEvent::Record {
            id,
            key,
            sql,
            resolved,
            timestamp,
        } => {
            entries.push(KnowledgeEntry {
                id,
                key,
                sql,
                resolved: *resolved,
                accepts: 0,
                rejects: 0,
                status: EntryStatus::Pending,
                notes: Vec::new(),
                created_at: timestamp,
                updated_at: timestamp,
            });
        }
        JournalEvent::Feedback {
            id,
            verdict,
            note,
            timestamp,
        } => {
            let entry = entries
                .iter_mut()
                .find(|e| e.id == id)
                .ok_or(KnowledgeError::UnknownEntry(id))?;
            match verdict {
                Verdict::Accept => {
                    entry.accepts += 1;
                    entry.status = EntryStatus::Accepted;
                }
                Verdict::Reject => {
                    entry.rejects += 1;
                    // an entry that was ever accepted stays accepted
                    if entry.accepts == 0 {
                        entry.status = EntryStatus::Rejected;
                    }
                }
            }
            if let Some(n) = note {
                entry.notes.push(n);
            }
            entry.updated_at = timestamp;
        }
    }
    Ok(())
}

impl KnowledgeStore {
    pub fn in_memory() -> Self {
        KnowledgeStore {
            path: None,
            entries: Vec::new(),
            clock: Arc::new(Utc::now),
        }
    }

    /// Opens (or starts) the journal at `path`, replaying existing events.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let path = path.as_ref().to_path_buf();
        let shown = path.display().to_string();
        let mut entries = Vec::new();
        match std::fs::File::open(&path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|source| KnowledgeError::Io {
                        path: shown.clone(),
                        source,
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let corrupt = |reason: String| KnowledgeError::CorruptJournal {
                        path: shown.clone(),
                        line: i + 1,
                        reason,
                    };
                    let event: JournalEvent =
                        serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                    apply(&mut entries, event).map_err(|e| corrupt(e.to_string()))?;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(KnowledgeError::Io { path: shown, source }),
        }
        Ok(KnowledgeStore {
            path: Some(path),
            entries,
            clock: Arc::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    fn append(&mut self, event: JournalEvent) -> Result<(), KnowledgeError> {
        if let Some(path) = &self.path {
            let io = |source| KnowledgeError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut line = serde_json::to_string(&event).expect("journal events serialize");
            line.push('\n');
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?;
            f.write_all(line.as_bytes()).map_err(io)?;
            f.flush().map_err(io)?;
        }
        apply(&mut self.entries, event)
    }

    pub fn get(&self, id: &str) -> Option<&KnowledgeEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn entries_for(&self, key: &str) -> Vec<&KnowledgeEntry> {
        self.entries.iter().filter(|e| e.key == key).collect()
    }

    /// The accepted entry with the most accepts; ties go to the most
    /// recently updated.
    pub fn lookup(&self, key: &str) -> Option<&KnowledgeEntry> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.key == key && e.status == EntryStatus::Accepted)
            .max_by_key(|(i, e)| (e.accepts, e.updated_at, *i))
            .map(|(_, e)| e)
    }

    /// SQL of rejected entries under `key`.
    pub fn blocked_sql(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.key == key && e.status == EntryStatus::Rejected)
            .map(|e| e.sql.text.as_str())
            .collect()
    }

    /// Records a translation as pending, or returns the id of the existing
    /// entry for the same (key, sql).
    pub fn record(
        &mut self,
        key: &str,
        sql: &SqlText,
        resolved: &ResolvedQuery,
    ) -> Result<String, KnowledgeError> {
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| e.key == key && e.sql.text == sql.text)
        {
            return Ok(e.id.clone());
        }
        let id = format!("kb-{:06}", self.entries.len() + 1);
        self.append(JournalEvent::Record {
            id: id.clone(),
            key: key.to_string(),
            sql: sql.clone(),
            resolved: Box::new(resolved.clone()),
            timestamp: (self.clock)(),
        })?;
        Ok(id)
    }

    pub fn feedback(
        &mut self,
        id: &str,
        verdict: Verdict,
        note: Option<&str>,
    ) -> Result<&KnowledgeEntry, KnowledgeError> {
        if self.get(id).is_none() {
            return Err(KnowledgeError::UnknownEntry(id.to_string()));
        }
        self.append(JournalEvent::Feedback {
            id: id.to_string(),
            verdict,
            note: note.map(str::to_string),
            timestamp: (self.clock)(),
        })?;
        Ok(self.get(id).expect("checked above"))
    }
}
