//! Append-only persistence.
//!
//! Layout of a store directory:
//!
//! ```text
//! records.jsonl   one RoundRecord per line (the record log)
//! sessions.jsonl  session index: session creations and round starts
//! errors.jsonl    attempts rejected by the feature pipeline
//! frames/         captured frames, <record_id>.<png|jpg>
//! ```
//!
//! Every append writes a whole line and syncs it. A torn trailing line left
//! by a crash is ignored when the log is read back.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{Emotion, Group, RoundRecord};

use super::GameError;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";
pub const FRAMES_DIR: &str = "frames";

/// One line of the session index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        group: Group,
        seed: u64,
        emotion_order: Vec<Emotion>,
        created_at: DateTime<Utc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        player_meta: Option<serde_json::Value>,
    },
    RoundStarted {
        session_id: String,
        round_id: String,
        round_index: u32,
        target_id: String,
        started_at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub session_id: String,
    pub round_id: String,
    pub error: String,
    pub captured_at: DateTime<Utc>,
    pub received_at: DateTime<Utc>,
}

struct Writers {
    records: File,
    sessions: File,
    errors: File,
    next_record_id: u64,
}

/// Record log plus session index, rooted at one directory.
pub struct Store {
    root: PathBuf,
    writers: Mutex<Writers>,
    records: RwLock<Arc<Vec<RoundRecord>>>,
    events: RwLock<Arc<Vec<SessionEvent>>>,
}

fn storage<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> GameError + '_ {
    move |e| GameError::Storage(format!("{}: {e}", path.display()))
}

fn open_append(path: &Path) -> Result<File, GameError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(storage(path))
}

/// Parses a JSON-lines file, skipping blank lines and a torn final line.
fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, GameError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(storage(path)(e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => {
                return Err(GameError::Storage(format!(
                    "{} line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Reads the record log of a store directory without opening it for
/// writing.
pub fn read_records(root: &Path) -> Result<Vec<RoundRecord>, GameError> {
    read_lines(&root.join(RECORDS_FILE))
}

pub fn read_session_events(root: &Path) -> Result<Vec<SessionEvent>, GameError> {
    read_lines(&root.join(SESSIONS_FILE))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, GameError> {
        let root = root.into();
        std::fs::create_dir_all(root.join(FRAMES_DIR)).map_err(storage(&root))?;
        let records = read_records(&root)?;
        let events = read_session_events(&root)?;
        // Drop any torn tail so new lines start on a line boundary.
        for name in [RECORDS_FILE, SESSIONS_FILE, ERRORS_FILE] {
            terminate_last_line(&root.join(name))?;
        }
        let next_record_id = records.iter().map(|r| r.record_id + 1).max().unwrap_or(1);
        let writers = Writers {
            records: open_append(&root.join(RECORDS_FILE))?,
            sessions: open_append(&root.join(SESSIONS_FILE))?,
            errors: open_append(&root.join(ERRORS_FILE))?,
            next_record_id,
        };
        Ok(Store {
            root,
            writers: Mutex::new(writers),
            records: RwLock::new(Arc::new(records)),
            events: RwLock::new(Arc::new(events)),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Snapshot of every record written so far.
    pub fn records(&self) -> Arc<Vec<RoundRecord>> {
        self.records.read().expect("records lock").clone()
    }

    pub fn session_events(&self) -> Arc<Vec<SessionEvent>> {
        self.events.read().expect("events lock").clone()
    }

    /// Writes the frame and the record produced by `build`, which receives
    /// the allocated record id and the frame reference. `frame` is the
    /// encoded image and its file extension.
    pub fn append_attempt(
        &self,
        frame: Option<(&[u8], &str)>,
        build: impl FnOnce(u64, Option<String>) -> RoundRecord,
    ) -> Result<RoundRecord, GameError> {
        let mut w = self.writers.lock().expect("writer lock");
        let record_id = w.next_record_id;
        let frame_ref = match frame {
            Some((bytes, ext)) => {
                let rel = format!("{FRAMES_DIR}/{record_id:08}.{ext}");
                let path = self.root.join(&rel);
                std::fs::write(&path, bytes).map_err(storage(&path))?;
                Some(rel)
            }
            None => None,
        };
        let record = build(record_id, frame_ref);
        let path = self.root.join(RECORDS_FILE);
        append_line(&mut w.records, &record).map_err(storage(&path))?;
        w.next_record_id += 1;
        let mut guard = self.records.write().expect("records lock");
        Arc::make_mut(&mut guard).push(record.clone());
        Ok(record)
    }

    pub fn append_event(&self, event: SessionEvent) -> Result<(), GameError> {
        let mut w = self.writers.lock().expect("writer lock");
        let path = self.root.join(SESSIONS_FILE);
        append_line(&mut w.sessions, &event).map_err(storage(&path))?;
        let mut guard = self.events.write().expect("events lock");
        Arc::make_mut(&mut guard).push(event);
        Ok(())
    }

    pub fn append_failure(&self, failure: &PipelineFailure) -> Result<(), GameError> {
        let mut w = self.writers.lock().expect("writer lock");
        let path = self.root.join(ERRORS_FILE);
        append_line(&mut w.errors, failure).map_err(storage(&path))
    }

    pub fn failures(&self) -> Result<Vec<PipelineFailure>, GameError> {
        read_lines(&self.root.join(ERRORS_FILE))
    }
}

fn append_line<T: Serialize>(file: &mut File, value: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(std::io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

fn terminate_last_line(path: &Path) -> Result<(), GameError> {
    let Ok(text) = std::fs::read(path) else {
        return Ok(());
    };
    if text.is_empty() || text.ends_with(b"\n") {
        return Ok(());
    }
    let keep = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    std::fs::write(path, &text[..keep]).map_err(storage(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AuSet;

    fn record(id: u64, frame_ref: Option<String>) -> RoundRecord {
        let ts = DateTime::from_timestamp_millis(1_700_000_000_000).unwrap();
        RoundRecord {
            record_id: id,
            session_id: "S000001".into(),
            round_id: "S000001-R1".into(),
            target_id: "t1".into(),
            emotion: Emotion::Sadness,
            group: Group::Control,
            attempt_index: id as u32,
            player_aus: AuSet::from_codes([1u32, 4]).unwrap(),
            target_aus: AuSet::from_codes([1u32, 4, 15]).unwrap(),
            score: 2.0 / 3.0,
            prescriptions_shown: false,
            frame_ref,
            captured_at: ts,
            received_at: ts,
        }
    }

    #[test]
    fn appends_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            let r = store.append_attempt(Some((b"png", "png")), record).unwrap();
            assert_eq!(r.record_id, 1);
            assert_eq!(r.frame_ref.as_deref(), Some("frames/00000001.png"));
            store.append_attempt(None, record).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.records().len(), 2);
        assert_eq!(store.append_attempt(None, record).unwrap().record_id, 3);
        assert_eq!(read_records(dir.path()).unwrap().len(), 3);
        assert!(dir.path().join("frames/00000001.png").exists());
    }

    #[test]
    fn torn_tail_is_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.append_attempt(None, record).unwrap();
        }
        let path = dir.path().join(RECORDS_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"record_id\": 2, \"sess").unwrap();
        drop(f);
        assert_eq!(read_records(dir.path()).unwrap().len(), 1);
        let store = Store::open(dir.path()).unwrap();
        store.append_attempt(None, record).unwrap();
        let back = read_records(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].record_id, 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(RECORDS_FILE), "garbage\n{}\n").unwrap();
        assert!(matches!(
            read_records(dir.path()),
            Err(GameError::Storage(_))
        ));
    }

    #[test]
    fn session_events_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ev = SessionEvent::Created {
            session_id: "S000001".into(),
            group: Group::Treatment,
            seed: 5,
            emotion_order: Emotion::ALL.to_vec(),
            created_at: Utc::now(),
            player_meta: Some(serde_json::json!({"device": "laptop"})),
        };
        Store::open(dir.path())
            .unwrap()
            .append_event(ev.clone())
            .unwrap();
        assert_eq!(read_session_events(dir.path()).unwrap(), vec![ev]);
        let line = std::fs::read_to_string(dir.path().join(SESSIONS_FILE)).unwrap();
        assert!(line.starts_with("{\"event\":\"created\""));
    }
}
