//! Append-only event log, one JSON object per line.
//!
//! Every append is flushed to stable storage before it returns. On open, a
//! final line without its newline is treated as a write interrupted by a
//! crash: it is dropped and cut from the file. Any other unreadable line is
//! corruption and fails the open.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Reject,
}

/// What happened, with its payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    CaptionsSubmitted { captions: Vec<String> },
    Verified { verdict: Verdict },
    Rejected { verdict: Verdict },
}

impl EventBody {
    pub fn verdict(verdict: Verdict) -> Self {
        match verdict {
            Verdict::Approve => EventBody::Verified { verdict },
            Verdict::Reject => EventBody::Rejected { verdict },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub pair_id: String,
    #[serde(flatten)]
    pub body: EventBody,
    pub actor: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Replay {
    pub events: Vec<AnnotationEvent>,
    /// Bytes of an interrupted final line that were discarded.
    pub torn_bytes: usize,
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_seq: u64,
}

impl EventLog {
    /// Opens (creating if needed) the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<(Self, Replay)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;

        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let torn_bytes = bytes.len() - complete;
        if torn_bytes > 0 {
            log::warn!(
                "{}: dropping {torn_bytes} bytes of an interrupted final event",
                path.display()
            );
            file.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
            file.sync_all().map_err(|e| Error::io(path, e))?;
        }
        file.seek(SeekFrom::End(0)).map_err(|e| Error::io(path, e))?;

        let text = std::str::from_utf8(&bytes[..complete])
            .map_err(|e| Error::invalid(format!("{}: log is not UTF-8: {e}", path.display())))?;
        let mut events: Vec<AnnotationEvent> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: AnnotationEvent = serde_json::from_str(line).map_err(|source| Error::Json {
                context: format!("{} line {}", path.display(), idx + 1),
                source,
            })?;
            if let Some(prev) = events.last() {
                if event.seq <= prev.seq {
                    return Err(Error::invalid(format!(
                        "{} line {}: sequence {} does not follow {}",
                        path.display(),
                        idx + 1,
                        event.seq,
                        prev.seq
                    )));
                }
            }
            events.push(event);
        }
        let last_seq = events.last().map_or(0, |e| e.seq);
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                last_seq,
            },
            Replay { events, torn_bytes },
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq + 1
    }

    /// Writes `event` and syncs it to disk. The sequence number must exceed
    /// every earlier one.
    pub fn append(&mut self, event: &AnnotationEvent) -> Result<()> {
        if event.seq <= self.last_seq {
            return Err(Error::invalid(format!(
                "event sequence {} does not follow {}",
                event.seq, self.last_seq
            )));
        }
        let mut line = serde_json::to_vec(event).map_err(|source| Error::Json {
            context: "serializing annotation event".into(),
            source,
        })?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.last_seq = event.seq;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(seq: u64) -> AnnotationEvent {
        AnnotationEvent {
            seq,
            timestamp_ms: 1000 + seq,
            pair_id: "p".into(),
            body: EventBody::CaptionsSubmitted {
                captions: vec!["a road".into()],
            },
            actor: "ann".into(),
        }
    }

    #[test]
    fn wire_format() {
        let json = serde_json::to_value(event(1)).unwrap();
        assert_eq!(json["kind"], "captions_submitted");
        assert_eq!(json["payload"]["captions"][0], "a road");
        let v = serde_json::to_value(AnnotationEvent {
            body: EventBody::verdict(Verdict::Reject),
            ..event(2)
        })
        .unwrap();
        assert_eq!(v["kind"], "rejected");
        assert_eq!(v["payload"]["verdict"], "reject");
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let (mut log, replay) = EventLog::open(&path).unwrap();
        assert!(replay.events.is_empty());
        log.append(&event(1)).unwrap();
        log.append(&event(2)).unwrap();
        assert!(log.append(&event(2)).is_err());
        drop(log);
        let (log, replay) = EventLog::open(&path).unwrap();
        assert_eq!(replay.events, vec![event(1), event(2)]);
        assert_eq!(log.next_seq(), 3);
    }

    #[test]
    fn torn_tail_is_dropped_and_cut() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let (mut log, _) = EventLog::open(&path).unwrap();
        log.append(&event(1)).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":2,"timestamp_ms":5,"pair"#).unwrap();
        drop(f);

        let (mut log, replay) = EventLog::open(&path).unwrap();
        assert_eq!(replay.events, vec![event(1)]);
        assert!(replay.torn_bytes > 0);
        log.append(&event(2)).unwrap();
        drop(log);
        let (_, replay) = EventLog::open(&path).unwrap();
        assert_eq!(replay.events, vec![event(1), event(2)]);
        assert_eq!(replay.torn_bytes, 0);
    }

    #[test]
    fn corrupt_middle_line_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let good = serde_json::to_string(&event(2)).unwrap();
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(EventLog::open(&path).is_err());
    }

    #[test]
    fn out_of_order_sequence_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let a = serde_json::to_string(&event(2)).unwrap();
        let b = serde_json::to_string(&event(1)).unwrap();
        std::fs::write(&path, format!("{a}\n{b}\n")).unwrap();
        assert!(EventLog::open(&path).is_err());
    }
}
