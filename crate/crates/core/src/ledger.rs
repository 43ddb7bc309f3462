//! Append-only hash-chained evolution ledger.
//!
//! The ledger records artifact lifecycle events (created, edited, tested,
//! promoted, published). Each event's hash covers all of its fields except
//! `event_hash` itself, and each event links to its predecessor through
//! `prev_event_hash` (the all-zero digest for the genesis event). A manifest's
//! evolution anchor points at one event; verification level 6 checks the
//! whole chain and then looks the anchor up.
//!
//! Persistence is a newline-delimited canonical-JSON file: a header line
//! carrying the ledger id, then one event per line.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, Digest256};
use crate::manifest::EvolutionAnchor;
use crate::timestamp::Timestamp;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger file {path} line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("ledger chain broken at event index {0}")]
    ChainBroken(usize),
    #[error("encoding error: {0}")]
    Canonical(#[from] canonical::CanonicalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Created,
    Edited,
    Tested,
    Promoted,
    Published,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactRef {
    pub name: String,
    pub namespace: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub artifact: ArtifactRef,
    pub payload_hash: Digest256,
    pub timestamp: Timestamp,
    pub prev_event_hash: Digest256,
    pub event_hash: Digest256,
}

impl LedgerEvent {
    /// Hash over every field except `event_hash`.
    pub fn compute_hash(&self) -> Result<Digest256, LedgerError> {
        let mut value = serde_json::to_value(self).map_err(canonical::CanonicalError::from)?;
        value
            .as_object_mut()
            .expect("event serializes to an object")
            .remove("event_hash");
        let tree = canonical::CanonicalValue::from_json_value(value)?;
        Ok(canonical::hash_canonical(&tree))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    ledger_id: String,
}

/// Chain verification result: `ok` iff every event hash recomputes and every
/// link matches; `first_broken` is the index of the earliest bad event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerVerification {
    pub ok: bool,
    pub first_broken: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLookup {
    Found { index: usize },
    NotFound,
}

/// A file-backed event chain. Single writer, many readers; every append is
/// flushed before returning.
#[derive(Debug)]
pub struct Ledger {
    ledger_id: String,
    path: PathBuf,
    events: Vec<LedgerEvent>,
}

impl Ledger {
    /// Create a new ledger file. Fails if the file already exists.
    pub fn create(path: impl Into<PathBuf>, ledger_id: impl Into<String>) -> Result<Self, LedgerError> {
        let path = path.into();
        let ledger_id = ledger_id.into();
        let header = Header {
            ledger_id: ledger_id.clone(),
        };
        let mut line = canonical::canonical_json(&header)?;
        line.push(b'\n');
        let mut file = std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)?;
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(Ledger {
            ledger_id,
            path,
            events: Vec::new(),
        })
    }

    /// Open an existing ledger, parsing (but not verifying) the chain.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LedgerError> {
        let path = path.into();
        let text = std::fs::read_to_string(&path)?;
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines.next().ok_or_else(|| LedgerError::Malformed {
            path: path.display().to_string(),
            line: 1,
            reason: "empty ledger file".into(),
        })?;
        let header: Header =
            canonical::from_canonical_json(header_line.as_bytes()).map_err(|e| {
                LedgerError::Malformed {
                    path: path.display().to_string(),
                    line: 1,
                    reason: e.to_string(),
                }
            })?;
        let mut events = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let event: LedgerEvent =
                canonical::from_canonical_json(line.as_bytes()).map_err(|e| {
                    LedgerError::Malformed {
                        path: path.display().to_string(),
                        line: idx + 1,
                        reason: e.to_string(),
                    }
                })?;
            events.push(event);
        }
        Ok(Ledger {
            ledger_id: header.ledger_id,
            path,
            events,
        })
    }

    pub fn ledger_id(&self) -> &str {
        &self.ledger_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Append an event: `prev_event_hash` is the last event's hash (or the
    /// zero digest for the genesis event) and `event_hash` is computed per
    /// the chain rule. The line is flushed before returning.
    pub fn append(
        &mut self,
        event_id: impl Into<String>,
        kind: EventKind,
        artifact: ArtifactRef,
        payload_hash: Digest256,
        timestamp: Timestamp,
    ) -> Result<&LedgerEvent, LedgerError> {
        let prev_event_hash = self
            .events
            .last()
            .map(|e| e.event_hash)
            .unwrap_or(Digest256::ZERO);
        let mut event = LedgerEvent {
            event_id: event_id.into(),
            kind,
            artifact,
            payload_hash,
            timestamp,
            prev_event_hash,
            event_hash: Digest256::ZERO,
        };
        event.event_hash = event.compute_hash()?;

        let mut line = canonical::canonical_json(&event)?;
        line.push(b'\n');
        let mut file = std::fs::OpenOptions::new().append(true).open(&self.path)?;
        file.write_all(&line)?;
        file.sync_data()?;

        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    /// Recompute every event hash and check every link. An empty ledger is
    /// trivially valid.
    pub fn verify(&self) -> LedgerVerification {
        let mut expected_prev = Digest256::ZERO;
        for (index, event) in self.events.iter().enumerate() {
            let recomputed = match event.compute_hash() {
                Ok(h) => h,
                Err(_) => {
                    return LedgerVerification {
                        ok: false,
                        first_broken: Some(index),
                    }
                }
            };
            if event.prev_event_hash != expected_prev || event.event_hash != recomputed {
                return LedgerVerification {
                    ok: false,
                    first_broken: Some(index),
                };
            }
            expected_prev = event.event_hash;
        }
        LedgerVerification {
            ok: true,
            first_broken: None,
        }
    }

    /// Look an anchor up in the verified chain. Fails with
    /// [`LedgerError::ChainBroken`] when the chain does not verify.
    pub fn lookup_anchor(&self, anchor: &EvolutionAnchor) -> Result<AnchorLookup, LedgerError> {
        let verification = self.verify();
        if let Some(broken) = verification.first_broken {
            return Err(LedgerError::ChainBroken(broken));
        }
        if anchor.ledger_id != self.ledger_id {
            return Ok(AnchorLookup::NotFound);
        }
        Ok(self
            .events
            .iter()
            .position(|e| e.event_hash == anchor.event_hash)
            .map(|index| AnchorLookup::Found { index })
            .unwrap_or(AnchorLookup::NotFound))
    }

    #[cfg(test)]
    pub(crate) fn events_mut(&mut self) -> &mut Vec<LedgerEvent> {
        &mut self.events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn artifact() -> ArtifactRef {
        ArtifactRef {
            name: "demo".into(),
            namespace: "@demo".into(),
            version: "1.0.0".into(),
        }
    }

    fn ts() -> Timestamp {
        Timestamp::parse("2026-02-01T09:00:00Z").unwrap()
    }

    fn temp_ledger() -> (tempfile::TempDir, Ledger) {
        let dir = tempfile::tempdir().unwrap();
        let ledger = Ledger::create(dir.path().join("events.log"), "ledger_demo").unwrap();
        (dir, ledger)
    }

    #[test]
    fn genesis_event_links_to_zero_digest_and_matches_oracle() {
        let (_dir, mut ledger) = temp_ledger();
        let payload = canonical::sha256(b"payload");
        let event = ledger
            .append("evt_0001", EventKind::Created, artifact(), payload, ts())
            .unwrap();
        assert_eq!(event.prev_event_hash, Digest256::ZERO);
        // Frozen from tests/gen_vectors.py for this exact event shape.
        assert_eq!(
            event.event_hash.to_string(),
            "sha256:ae99602094886724c27d9a2b6abff67dcab7aa1957f90cc84b3ec4e2e870574f"
        );
    }

    #[test]
    fn appended_events_link_by_hash() {
        let (_dir, mut ledger) = temp_ledger();
        let first_hash = ledger
            .append("e1", EventKind::Created, artifact(), canonical::sha256(b"a"), ts())
            .unwrap()
            .event_hash;
        let second = ledger
            .append("e2", EventKind::Edited, artifact(), canonical::sha256(b"b"), ts())
            .unwrap();
        assert_eq!(second.prev_event_hash, first_hash);
    }

    #[test]
    fn stored_event_hashes_recompute() {
        let (_dir, mut ledger) = temp_ledger();
        for i in 0..5 {
            ledger
                .append(
                    format!("e{i}"),
                    EventKind::Edited,
                    artifact(),
                    canonical::sha256(format!("p{i}").as_bytes()),
                    ts(),
                )
                .unwrap();
        }
        for event in ledger.events() {
            assert_eq!(event.compute_hash().unwrap(), event.event_hash);
        }
    }

    #[test]
    fn empty_ledger_verifies() {
        let (_dir, ledger) = temp_ledger();
        assert!(ledger.verify().ok);
    }

    #[test]
    fn ledger_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        {
            let mut ledger = Ledger::create(&path, "ledger_demo").unwrap();
            ledger
                .append("e1", EventKind::Created, artifact(), canonical::sha256(b"x"), ts())
                .unwrap();
        }
        let reopened = Ledger::open(&path).unwrap();
        assert_eq!(reopened.ledger_id(), "ledger_demo");
        assert_eq!(reopened.events().len(), 1);
        assert!(reopened.verify().ok);
    }

    #[test]
    fn mutating_any_event_is_detected_at_that_index() {
        // Exhaustive oracle loop: tamper each event's payload hash in turn.
        let (_dir, mut ledger) = temp_ledger();
        for i in 0..10 {
            ledger
                .append(
                    format!("e{i}"),
                    EventKind::Tested,
                    artifact(),
                    canonical::sha256(format!("p{i}").as_bytes()),
                    ts(),
                )
                .unwrap();
        }
        for k in 0..10 {
            let mut copy_events = ledger.events().to_vec();
            copy_events[k].payload_hash = canonical::sha256(b"tampered");
            let tampered = {
                let (_d2, mut fresh) = temp_ledger();
                *fresh.events_mut() = copy_events;
                fresh.verify()
            };
            assert!(!tampered.ok);
            assert_eq!(tampered.first_broken, Some(k), "mutation at {k} must be caught at {k}");
        }
        assert!(ledger.verify().ok);
    }

    #[test]
    fn anchor_lookup_behaviour() {
        let (_dir, mut ledger) = temp_ledger();
        let hash = ledger
            .append("e1", EventKind::Promoted, artifact(), canonical::sha256(b"x"), ts())
            .unwrap()
            .event_hash;

        let found = ledger
            .lookup_anchor(&EvolutionAnchor {
                ledger_id: "ledger_demo".into(),
                event_hash: hash,
            })
            .unwrap();
        assert_eq!(found, AnchorLookup::Found { index: 0 });

        let missing = ledger
            .lookup_anchor(&EvolutionAnchor {
                ledger_id: "ledger_demo".into(),
                event_hash: canonical::sha256(b"random"),
            })
            .unwrap();
        assert_eq!(missing, AnchorLookup::NotFound);

        let wrong_ledger = ledger
            .lookup_anchor(&EvolutionAnchor {
                ledger_id: "ledger_other".into(),
                event_hash: hash,
            })
            .unwrap();
        assert_eq!(wrong_ledger, AnchorLookup::NotFound);
    }

    #[test]
    fn anchor_lookup_on_broken_chain_errors() {
        let (_dir, mut ledger) = temp_ledger();
        let hash = ledger
            .append("e1", EventKind::Created, artifact(), canonical::sha256(b"x"), ts())
            .unwrap()
            .event_hash;
        ledger
            .append("e2", EventKind::Edited, artifact(), canonical::sha256(b"y"), ts())
            .unwrap();
        ledger.events_mut()[0].payload_hash = canonical::sha256(b"tampered");
        let err = ledger
            .lookup_anchor(&EvolutionAnchor {
                ledger_id: "ledger_demo".into(),
                event_hash: hash,
            })
            .unwrap_err();
        assert!(matches!(err, LedgerError::ChainBroken(0)));
    }
}
