//! Trust-on-first-use pin store for registry key fingerprints.
//!
//! The store lives in its own file, separate from the resolver configuration,
//! so an attacker who can rewrite namespace bindings cannot simultaneously
//! rewrite the pinned fingerprints. Writes go through write-temp-then-rename,
//! so readers observe either the old or the new store, never a partial one.
//!
//! File format (canonical JSON):
//! `{"entries":{"<registry_id>":{"fingerprint":"sha256:...","pinned_at":"<RFC3339>","url":"..."}}}`

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::identity::Fingerprint;
use crate::timestamp::Timestamp;

#[derive(Debug, Error)]
pub enum TofuError {
    #[error(
        "pin conflict for registry {registry_id}: pinned {pinned}, offered {offered}; \
         re-run with an explicit update to replace the pin"
    )]
    PinConflict {
        registry_id: String,
        pinned: Fingerprint,
        offered: Fingerprint,
    },
    #[error("malformed pin store {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("io error on pin store: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of comparing an attested fingerprint against a pinned one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TofuDecision {
    Accept,
    Reject,
}

/// Accept iff the fingerprints are byte-equal. Renderings are normalized to
/// raw digest bytes at parse time, so hex case differences cannot leak in.
pub fn tofu_check(attested: &Fingerprint, pinned: &Fingerprint) -> TofuDecision {
    if attested == pinned {
        TofuDecision::Accept
    } else {
        TofuDecision::Reject
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinMode {
    FirstUse,
    ExplicitUpdate,
}

/// One pinned registry fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinEntry {
    pub fingerprint: Fingerprint,
    pub pinned_at: Timestamp,
    pub url: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StoreFile {
    entries: BTreeMap<String, PinEntry>,
}

/// File-backed pin store. Single-writer contract; concurrent readers are safe
/// because replacement is atomic.
#[derive(Debug)]
pub struct TofuStore {
    path: PathBuf,
    entries: BTreeMap<String, PinEntry>,
}

impl TofuStore {
    /// Open a store, treating a missing file as empty.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, TofuError> {
        let path = path.into();
        let entries = match std::fs::read(&path) {
            Ok(bytes) => {
                let file: StoreFile =
                    canonical::from_canonical_json(&bytes).map_err(|e| TofuError::Malformed {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?;
                file.entries
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(TofuStore { path, entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entry(&self, registry_id: &str) -> Option<&PinEntry> {
        self.entries.get(registry_id)
    }

    pub fn entries(&self) -> &BTreeMap<String, PinEntry> {
        &self.entries
    }

    /// Re-read the store from disk (pick up a concurrent writer's result).
    pub fn reload(&mut self) -> Result<(), TofuError> {
        let fresh = TofuStore::open(self.path.clone())?;
        self.entries = fresh.entries;
        Ok(())
    }

    /// Record a pin. At most one fingerprint per registry id.
    ///
    /// In first-use mode, re-pinning the same fingerprint is an idempotent
    /// success; a different fingerprint is a [`TofuError::PinConflict`] until
    /// the caller switches to [`PinMode::ExplicitUpdate`].
    pub fn pin(
        &mut self,
        registry_id: &str,
        url: &str,
        fingerprint: Fingerprint,
        mode: PinMode,
        now: Timestamp,
    ) -> Result<(), TofuError> {
        if let Some(existing) = self.entries.get(registry_id) {
            match mode {
                PinMode::FirstUse if existing.fingerprint == fingerprint => return Ok(()),
                PinMode::FirstUse => {
                    return Err(TofuError::PinConflict {
                        registry_id: registry_id.to_owned(),
                        pinned: existing.fingerprint,
                        offered: fingerprint,
                    });
                }
                PinMode::ExplicitUpdate => {}
            }
        }
        self.entries.insert(
            registry_id.to_owned(),
            PinEntry {
                fingerprint,
                pinned_at: now,
                url: url.to_owned(),
            },
        );
        self.save()
    }

    fn save(&self) -> Result<(), TofuError> {
        let file = StoreFile {
            entries: self.entries.clone(),
        };
        let bytes = canonical::canonical_json(&file).expect("pin store serializes");
        atomic_write(&self.path, &bytes)?;
        Ok(())
    }
}

/// Write-temp-then-rename in the target's directory, fsyncing the temp file
/// before the rename so a crash leaves either the old or the new content.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    tmp.file.write_all(bytes)?;
    tmp.file.sync_data()?;
    std::fs::rename(&tmp.path, path)?;
    tmp.keep = true;
    Ok(())
}

struct TempGuard {
    path: PathBuf,
    file: std::fs::File,
    keep: bool,
}

impl Drop for TempGuard {
    fn drop(&mut self) {
        if !self.keep {
            let _ = std::fs::remove_file(&self.path);
        }
    }
}

fn tempfile_in(dir: &Path) -> std::io::Result<TempGuard> {
    for attempt in 0u32.. {
        let name = format!(
            ".tmp-{}-{}-{attempt}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.subsec_nanos())
                .unwrap_or(0)
        );
        let path = dir.join(name);
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(file) => {
                return Ok(TempGuard {
                    path,
                    file,
                    keep: false,
                })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}
