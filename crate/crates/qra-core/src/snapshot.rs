//! Versioned, checksummed engine snapshots.
//!
//! A snapshot is a JSON document `{version, checksum, payload}` where
//! `payload` is the serialized engine and `checksum` is the SHA-256 of the
//! payload text exactly as it sits in the file. The payload travels as a raw
//! JSON slice so the checksum never depends on re-serialization quirks.
//! Restoring verifies version and checksum, then rebuilds the engine —
//! including the derived feedback indexes, which are recomputed from the
//! stored documents rather than persisted.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::atomic_write;
use crate::pipeline::Engine;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Write(#[from] crate::io::IoError),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    version: u32,
    checksum: String,
    payload: Box<RawValue>,
}

fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialize an engine into the snapshot document format.
pub fn snapshot_string(engine: &Engine) -> String {
    let payload = serde_json::to_string(engine).expect("engine state serializes");
    let checksum = sha256_hex(&payload);
    let doc = SnapshotDoc {
        version: SNAPSHOT_VERSION,
        checksum,
        payload: RawValue::from_string(payload).expect("payload is valid JSON"),
    };
    serde_json::to_string(&doc).expect("snapshot document serializes")
}

/// Parse and verify a snapshot document.
pub fn restore_string(text: &str) -> Result<Engine, SnapshotError> {
    let doc: SnapshotDoc =
        serde_json::from_str(text).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    if doc.version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Corrupt(format!(
            "version {} is not supported (expected {SNAPSHOT_VERSION})",
            doc.version
        )));
    }
    let payload = doc.payload.get();
    let actual = sha256_hex(payload);
    if actual != doc.checksum {
        return Err(SnapshotError::Corrupt(format!(
            "checksum mismatch: stored {}, computed {actual}",
            doc.checksum
        )));
    }
    serde_json::from_str(payload).map_err(|e| SnapshotError::Corrupt(e.to_string()))
}

/// Atomically write a snapshot file.
pub fn save_snapshot(path: &Path, engine: &Engine) -> Result<(), SnapshotError> {
    Ok(atomic_write(path, snapshot_string(engine).as_bytes())?)
}

/// Load and verify a snapshot file.
pub fn load_snapshot(path: &Path) -> Result<Engine, SnapshotError> {
    let text = fs::read_to_string(path)
        .map_err(|source| SnapshotError::Io { path: path.to_path_buf(), source })?;
    restore_string(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::model::RatingEvent;
    use crate::repository::Direction;

    fn event(user: &str, rating: i64, ts: i64, feedback: Option<&str>) -> RatingEvent {
        RatingEvent {
            user_id: user.to_string(),
            product_id: "p1".to_string(),
            rating,
            feedback: feedback.map(str::to_string),
            timestamp: ts,
        }
    }

    fn busy_engine() -> Engine {
        let mut engine = Engine::new(RunConfig::default()).unwrap();
        engine
            .seed_repository("p1", Direction::Upgrading, &[("battery is very good".into(), 0)])
            .unwrap();
        engine
            .seed_repository("p1", Direction::Downgrading, &[("battery drains fast".into(), 0)])
            .unwrap();
        engine.process_event(&event("u1", 3, 1, None)).unwrap();
        engine.process_event(&event("u2", 5, 2, Some("battery is very good"))).unwrap();
        engine.process_event(&event("u3", 1, 3, Some("unrelated courier rant"))).unwrap();
        engine
    }

    #[test]
    fn round_trip_restores_identical_state() {
        let engine = busy_engine();
        let restored = restore_string(&snapshot_string(&engine)).unwrap();
        assert_eq!(restored, engine);
    }

    #[test]
    fn restored_engine_replays_the_future_identically() {
        let mut engine = busy_engine();
        let mut restored = restore_string(&snapshot_string(&engine)).unwrap();
        let next = event("u4", 4, 4, None);
        assert_eq!(engine.process_event(&next).unwrap(), restored.process_event(&next).unwrap());
        assert_eq!(engine, restored);
    }

    #[test]
    fn empty_engine_snapshot_restores_to_initial_thresholds() {
        let engine = Engine::new(RunConfig::default()).unwrap();
        let text = snapshot_string(&engine);
        let mut restored = restore_string(&text).unwrap();
        let verdict = restored.process_event(&event("u1", 3, 1, None)).unwrap();
        assert_eq!((verdict.upgrading_threshold, verdict.downgrading_threshold), (3.0, 3.0));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = snapshot_string(&busy_engine());
        let truncated = &text[..text.len() / 2];
        assert!(matches!(restore_string(truncated), Err(SnapshotError::Corrupt(_))));
    }

    #[test]
    fn payload_tampering_fails_the_checksum() {
        let text = snapshot_string(&busy_engine());
        assert!(text.contains("\"clock\":3"));
        let tampered = text.replace("\"clock\":3", "\"clock\":7");
        match restore_string(&tampered) {
            Err(SnapshotError::Corrupt(msg)) => {
                assert!(msg.contains("checksum"), "got: {msg}")
            }
            other => panic!("expected checksum failure, got {other:?}"),
        }
    }

    #[test]
    fn checksum_tampering_is_detected() {
        let text = snapshot_string(&busy_engine());
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let checksum = doc["checksum"].as_str().unwrap().to_string();
        let flipped = if checksum.starts_with('0') {
            text.replacen(&checksum, &format!("1{}", &checksum[1..]), 1)
        } else {
            text.replacen(&checksum, &format!("0{}", &checksum[1..]), 1)
        };
        assert!(matches!(restore_string(&flipped), Err(SnapshotError::Corrupt(_))));
    }

    #[test]
    fn unknown_version_is_rejected_before_the_payload_is_touched() {
        let text = snapshot_string(&busy_engine());
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        match restore_string(&bumped) {
            Err(SnapshotError::Corrupt(msg)) => assert!(msg.contains("version"), "got: {msg}"),
            other => panic!("expected version failure, got {other:?}"),
        }
    }

    #[test]
    fn save_and_load_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("engine.snapshot");
        let engine = busy_engine();
        save_snapshot(&path, &engine).unwrap();
        assert_eq!(load_snapshot(&path).unwrap(), engine);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_snapshot(Path::new("/nonexistent/engine.snapshot")).unwrap_err();
        assert!(matches!(err, SnapshotError::Io { .. }));
    }
}
