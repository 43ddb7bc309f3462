//! The six-level verification chain.
//!
//! | level | proves                                   | needs                        |
//! |-------|------------------------------------------|------------------------------|
//! | 1     | no file corrupted or substituted         | extracted files              |
//! | 2     | artifact is a deterministic snapshot     | extracted files              |
//! | 3     | the claimed publisher signed the manifest| publisher public key         |
//! | 4     | envelope unchanged since packaging       | artifact bytes               |
//! | 5     | an identified registry distributed it    | registry doc (+ pin)         |
//! | 6     | development history is tamper-evident    | evolution ledger             |
//!
//! Default mode evaluates levels 1–3, strict 1–5, full 1–6. Levels are
//! independent: a failure at one never stops evaluation of the others, and
//! the composite result is the conjunction of every evaluated level. The one
//! structural dependency: levels 1–2 need extracted files, and extraction in
//! strict/full mode is gated on the level-4 checksum, so when the contents
//! cannot be extracted those two levels report `evaluated = false` with an
//! `extraction_failed` diagnostic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::PackagedArtifact;
use crate::attestation::{verify_attestation, verify_manifest_signature, RegistryIdentityDoc};
use crate::canonical::{self};
use crate::identity::{Fingerprint, PUBLIC_KEY_LEN};
use crate::ledger::{AnchorLookup, Ledger};
use crate::manifest::{compute_content_hash, ProvenanceManifest, SourceFile};
use crate::tofu::{tofu_check, TofuDecision};

/// Which levels run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Default,
    Strict,
    Full,
}

impl Mode {
    pub fn levels(&self) -> std::ops::RangeInclusive<u8> {
        match self {
            Mode::Default => 1..=3,
            Mode::Strict => 1..=5,
            Mode::Full => 1..=6,
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "default" => Some(Mode::Default),
            "strict" => Some(Mode::Strict),
            "full" => Some(Mode::Full),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Default => "default",
            Mode::Strict => "strict",
            Mode::Full => "full",
        })
    }
}

/// Outcome of one level: a stable machine-readable code plus human detail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelResult {
    pub evaluated: bool,
    pub passed: bool,
    pub code: String,
    pub detail: String,
}

impl LevelResult {
    fn pass() -> Self {
        LevelResult {
            evaluated: true,
            passed: true,
            code: "ok".into(),
            detail: String::new(),
        }
    }

    fn fail(code: &str, detail: impl Into<String>) -> Self {
        LevelResult {
            evaluated: true,
            passed: false,
            code: code.into(),
            detail: detail.into(),
        }
    }

    fn skipped(code: &str, detail: impl Into<String>) -> Self {
        LevelResult {
            evaluated: false,
            passed: false,
            code: code.into(),
            detail: detail.into(),
        }
    }
}

/// Per-level results plus the composite conjunction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: Mode,
    pub levels: BTreeMap<u8, LevelResult>,
    pub composite: bool,
}

impl VerificationReport {
    pub fn level(&self, index: u8) -> &LevelResult {
        &self.levels[&index]
    }

    /// Canonical JSON rendering for machine consumption.
    pub fn to_json(&self) -> Vec<u8> {
        canonical::canonical_json(self).expect("report serializes")
    }
}

/// Context a verification run draws on. What is required depends on the mode;
/// missing context is a configuration error, not a verification failure.
#[derive(Default)]
pub struct VerifyContext<'a> {
    pub publisher_key: Option<[u8; PUBLIC_KEY_LEN]>,
    pub registry_doc: Option<&'a RegistryIdentityDoc>,
    /// Pinned fingerprint for the distributing registry; absent for unbound
    /// namespaces, in which case level 5 skips only the pin comparison.
    pub pinned: Option<Fingerprint>,
    /// Namespace the consumer asked for; defaults to the manifest's.
    pub expected_namespace: Option<String>,
    pub ledger: Option<&'a Ledger>,
    pub skew_seconds: i64,
}

#[derive(Debug, Error)]
pub enum VerifyConfigError {
    #[error("verification needs the publisher public key (level 3)")]
    MissingPublisherKey,
    #[error("mode {0} needs the registry identity document (level 5)")]
    MissingRegistryDoc(Mode),
    #[error("mode full needs an evolution ledger (level 6)")]
    MissingLedger,
}

/// Level 1 — file integrity: every extracted file's digest matches its
/// manifest checksum, with no extra or missing files.
pub fn verify_level1(manifest: &ProvenanceManifest, files: &[SourceFile]) -> LevelResult {
    let expected = manifest.checksums();
    let mut seen = BTreeMap::new();
    for file in files {
        seen.insert(file.path.as_str(), canonical::sha256(&file.bytes));
    }
    for (path, digest) in &seen {
        match expected.get(path) {
            None => return LevelResult::fail("unexpected_file", format!("{path:?} not in manifest")),
            Some(want) if want != digest => {
                return LevelResult::fail(
                    "file_checksum_mismatch",
                    format!("{path:?}: manifest says {want}, file hashes to {digest}"),
                )
            }
            Some(_) => {}
        }
    }
    for path in expected.keys() {
        if !seen.contains_key(path) {
            return LevelResult::fail("missing_file", format!("{path:?} listed but not present"));
        }
    }
    LevelResult::pass()
}

/// Level 2 — artifact identity: the content hash recomputed from the
/// extracted files equals the manifest's.
pub fn verify_level2(manifest: &ProvenanceManifest, files: &[SourceFile]) -> LevelResult {
    let recomputed = match compute_content_hash(
        &manifest.name,
        &manifest.version,
        &manifest.pkg_id,
        files.iter().map(|f| (f.path.as_str(), f.bytes.as_slice())),
    ) {
        Ok(digest) => digest,
        Err(e) => return LevelResult::fail("content_hash_error", e.to_string()),
    };
    if recomputed != manifest.content_hash {
        return LevelResult::fail(
            "content_hash_mismatch",
            format!(
                "manifest says {}, files hash to {recomputed}",
                manifest.content_hash
            ),
        );
    }
    LevelResult::pass()
}

/// Level 3 — publisher authenticity: the signature verifies over the
/// manifest's canonical bytes and the key matches the claimed fingerprint.
pub fn verify_level3(
    manifest: &ProvenanceManifest,
    sig: &crate::attestation::PublisherSignature,
    publisher_key: &[u8; PUBLIC_KEY_LEN],
) -> LevelResult {
    match verify_manifest_signature(manifest, sig, publisher_key) {
        Ok(()) => LevelResult::pass(),
        Err(reason) => {
            let code = if reason.starts_with("fingerprint mismatch") {
                "fingerprint_mismatch"
            } else {
                "publisher_signature_invalid"
            };
            LevelResult::fail(code, reason)
        }
    }
}

/// Level 4 — envelope integrity: the CHECKSUM entry matches the compressed
/// contents.
pub fn verify_level4(artifact: &PackagedArtifact) -> LevelResult {
    if artifact.checksum_matches() {
        LevelResult::pass()
    } else {
        LevelResult::fail(
            "envelope_checksum_mismatch",
            format!(
                "CHECKSUM says {}, contents hash to {}",
                artifact.checksum,
                canonical::sha256(&artifact.contents)
            ),
        )
    }
}

/// Level 5 — registry attestation: the countersignature verifies under the
/// key active at acceptance time, the attestation covers this manifest, the
/// namespace matches, and (when a pin is supplied) the fingerprint equals the
/// pinned one.
pub fn verify_level5(
    artifact: &PackagedArtifact,
    doc: &RegistryIdentityDoc,
    pinned: Option<&Fingerprint>,
    expected_namespace: Option<&str>,
    skew_seconds: i64,
) -> LevelResult {
    let Some(signed) = &artifact.registry_attestation else {
        return LevelResult::fail("missing_attestation", "artifact carries no registry attestation");
    };
    let check = verify_attestation(
        signed,
        doc,
        &artifact.manifest,
        &artifact.publisher_sig.signed_at,
        skew_seconds,
    );
    if !check.passed() {
        return LevelResult::fail("attestation_invalid", check.failures.join("; "));
    }
    if let Some(pinned) = pinned {
        if tofu_check(&signed.attestation.registry_fingerprint, pinned) == TofuDecision::Reject {
            return LevelResult::fail(
                "tofu_fingerprint_mismatch",
                format!(
                    "attestation fingerprint {} does not match pinned {pinned}",
                    signed.attestation.registry_fingerprint
                ),
            );
        }
    }
    let expected_ns = expected_namespace.unwrap_or(&artifact.manifest.namespace);
    if signed.attestation.namespace != expected_ns {
        return LevelResult::fail(
            "namespace_mismatch",
            format!(
                "attestation namespace {:?} does not match expected {expected_ns:?}",
                signed.attestation.namespace
            ),
        );
    }
    LevelResult::pass()
}

/// Level 6 — lineage provenance: the evolution anchor resolves to an event in
/// a ledger whose hash chain verifies.
pub fn verify_level6(manifest: &ProvenanceManifest, ledger: &Ledger) -> LevelResult {
    let Some(anchor) = &manifest.lineage.evolution_anchor else {
        // Requesting full mode asserts lineage is expected; an unanchored
        // manifest fails rather than skips.
        return LevelResult::fail("missing_anchor", "manifest declares no evolution anchor");
    };
    match ledger.lookup_anchor(anchor) {
        Ok(AnchorLookup::Found { index }) => {
            let mut result = LevelResult::pass();
            result.detail = format!("anchored at ledger event {index}");
            result
        }
        Ok(AnchorLookup::NotFound) => LevelResult::fail(
            "anchor_not_found",
            format!("no event {} in ledger {}", anchor.event_hash, ledger.ledger_id()),
        ),
        Err(e) => LevelResult::fail("ledger_chain_broken", e.to_string()),
    }
}

/// Run every level the mode calls for and compose the results.
///
/// All levels of the selected mode evaluate even when an earlier one fails
/// (modulo the extraction dependency documented on the module).
pub fn verify(
    artifact: &PackagedArtifact,
    mode: Mode,
    ctx: &VerifyContext<'_>,
) -> Result<VerificationReport, VerifyConfigError> {
    let publisher_key = ctx.publisher_key.ok_or(VerifyConfigError::MissingPublisherKey)?;
    let needs_doc = *mode.levels().end() >= 5;
    if needs_doc && ctx.registry_doc.is_none() {
        return Err(VerifyConfigError::MissingRegistryDoc(mode));
    }
    if mode == Mode::Full && ctx.ledger.is_none() {
        return Err(VerifyConfigError::MissingLedger);
    }

    let mut levels: BTreeMap<u8, LevelResult> = BTreeMap::new();

    // Level 4 first where the mode includes it: extraction is gated on it.
    let level4 = verify_level4(artifact);
    let extraction = if needs_doc {
        if level4.passed {
            Some(artifact.unpack_contents(true))
        } else {
            None
        }
    } else {
        Some(artifact.unpack_contents(false))
    };

    match extraction {
        Some(Ok(files)) => {
            levels.insert(1, verify_level1(&artifact.manifest, &files));
            levels.insert(2, verify_level2(&artifact.manifest, &files));
        }
        Some(Err(e)) => {
            levels.insert(1, LevelResult::skipped("extraction_failed", e.to_string()));
            levels.insert(2, LevelResult::skipped("extraction_failed", e.to_string()));
        }
        None => {
            let detail = "contents not extracted: envelope checksum mismatch";
            levels.insert(1, LevelResult::skipped("extraction_failed", detail));
            levels.insert(2, LevelResult::skipped("extraction_failed", detail));
        }
    }

    levels.insert(
        3,
        verify_level3(&artifact.manifest, &artifact.publisher_sig, &publisher_key),
    );

    if mode.levels().contains(&4) {
        levels.insert(4, level4);
    } else {
        levels.insert(4, LevelResult::skipped("not_in_mode", "level 4 runs in strict and full modes"));
    }

    if mode.levels().contains(&5) {
        let doc = ctx.registry_doc.expect("checked above");
        levels.insert(
            5,
            verify_level5(
                artifact,
                doc,
                ctx.pinned.as_ref(),
                ctx.expected_namespace.as_deref(),
                ctx.skew_seconds,
            ),
        );
    } else {
        levels.insert(5, LevelResult::skipped("not_in_mode", "level 5 runs in strict and full modes"));
    }

    if mode.levels().contains(&6) {
        let ledger = ctx.ledger.expect("checked above");
        levels.insert(6, verify_level6(&artifact.manifest, ledger));
    } else {
        levels.insert(6, LevelResult::skipped("not_in_mode", "level 6 runs in full mode"));
    }

    let composite = levels
        .values()
        .filter(|r| r.evaluated)
        .all(|r| r.passed)
        // A report where nothing evaluated proves nothing.
        && levels.values().any(|r| r.evaluated);

    Ok(VerificationReport {
        mode,
        levels,
        composite,
    })
}
