//! Publisher signing, registry identity, and the countersigning publish
//! pipeline.
//!
//! The publisher signs the canonical bytes of the provenance manifest at
//! packaging time, producing `signature.json`. At publication time the
//! registry verifies the publisher signature, recomputes the content hash
//! from the extracted sources, checks namespace authorization, optionally
//! runs a scan hook, and only then emits its attestation: a document binding
//! the manifest hash, artifact coordinates, acceptance timestamp, and the
//! performed checks, signed with the registry key. Countersigning keeps the
//! two claims independent and temporally ordered, and packaging needs no
//! network: nothing here calls out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{self, ArchiveError};
use crate::canonical::{self, Digest256};
use crate::identity::{
    self, decode_public_key, encode_public_key, Fingerprint, KeyPair, PublisherIdentity,
    SignatureBytes, PUBLIC_KEY_LEN,
};
use crate::manifest::{
    compute_content_hash, validate_namespace, ManifestError, ProvenanceManifest, SourceFile,
};
use crate::timestamp::Timestamp;

#[derive(Debug, Error)]
pub enum AttestError {
    #[error("invalid namespace: {0}")]
    Namespace(#[from] ManifestError),
    #[error("identity document invalid: {0}")]
    InvalidIdentityDoc(String),
    #[error("rotation time {rotation} precedes the current key's validity start {current}")]
    RotationBeforeValidity { rotation: String, current: String },
    #[error("no registry key active at {0}")]
    NoKeyActive(String),
    #[error("signing key does not match the identity document's current key")]
    KeyMismatch,
    #[error("encoding error: {0}")]
    Canonical(#[from] canonical::CanonicalError),
}

/// Rejections from the publish pipeline, one per pipeline step.
#[derive(Debug, Error)]
pub enum PublishError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(#[from] ArchiveError),
    #[error("artifact already carries a registry attestation")]
    DuplicateAttestation,
    #[error("unknown publisher {0}")]
    UnknownPublisher(Fingerprint),
    #[error("bad publisher signature: {0}")]
    BadPublisherSignature(String),
    #[error("content hash mismatch: manifest says {declared}, sources hash to {computed}")]
    ContentHashMismatch {
        declared: Digest256,
        computed: Digest256,
    },
    #[error("publisher {publisher} is not authorized for namespace {namespace}")]
    NamespaceUnauthorized {
        publisher: Fingerprint,
        namespace: String,
    },
    #[error("security scan rejected the artifact")]
    ScanFailed,
    #[error("acceptance time {accepted_at} precedes the publisher signing time {signed_at}")]
    ClockOrder {
        signed_at: String,
        accepted_at: String,
    },
    #[error("registry configuration error: {0}")]
    Config(#[from] AttestError),
}

/// `signature.json`: the publisher's claim over the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublisherSignature {
    pub publisher_id: String,
    pub publisher_fingerprint: Fingerprint,
    pub signature: SignatureBytes,
    pub signed_at: Timestamp,
}

/// Sign the canonical bytes of a manifest. `signed_at` mirrors the manifest's
/// build timestamp so the document carries a single packaging instant.
pub fn sign_manifest(
    manifest: &ProvenanceManifest,
    publisher: &PublisherIdentity,
) -> Result<PublisherSignature, AttestError> {
    let bytes = canonical::canonical_json(manifest)?;
    Ok(PublisherSignature {
        publisher_id: publisher.publisher_id.clone(),
        publisher_fingerprint: publisher.fingerprint(),
        signature: publisher.key_pair.sign(&bytes),
        signed_at: manifest.build.timestamp.clone(),
    })
}

/// Check a publisher signature against a candidate public key.
pub fn verify_manifest_signature(
    manifest: &ProvenanceManifest,
    sig: &PublisherSignature,
    public_key: &[u8; PUBLIC_KEY_LEN],
) -> Result<(), String> {
    if Fingerprint::of_public_key(public_key) != sig.publisher_fingerprint {
        return Err(format!(
            "fingerprint mismatch: key is {}, signature claims {}",
            Fingerprint::of_public_key(public_key),
            sig.publisher_fingerprint
        ));
    }
    let bytes = canonical::canonical_json(manifest).map_err(|e| e.to_string())?;
    if !identity::verify(public_key, &bytes, sig.signature.as_bytes()) {
        return Err("signature does not verify over the manifest".into());
    }
    Ok(())
}

/// One retired registry key with its validity window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotatedKey {
    pub public_key: String,
    pub fingerprint: Fingerprint,
    pub valid_from: Timestamp,
    pub valid_until: Timestamp,
}

/// The registry identity document served at
/// `/.well-known/package-registry.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryIdentityDoc {
    pub registry_id: String,
    pub registry_url: String,
    pub public_key: String,
    pub key_fingerprint: Fingerprint,
    pub namespaces: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_registry: Option<String>,
    pub key_valid_from: Timestamp,
    pub key_rotation_history: Vec<RotatedKey>,
}

impl RegistryIdentityDoc {
    /// Structural invariants: the fingerprint recomputes from the public key,
    /// rotation periods are ordered, disjoint, and end before the current
    /// key's validity starts.
    pub fn validate(&self) -> Result<(), AttestError> {
        let key = decode_public_key(&self.public_key)
            .map_err(|e| AttestError::InvalidIdentityDoc(e.to_string()))?;
        if Fingerprint::of_public_key(&key) != self.key_fingerprint {
            return Err(AttestError::InvalidIdentityDoc(
                "key_fingerprint does not match public_key".into(),
            ));
        }
        for ns in &self.namespaces {
            validate_namespace(ns)?;
        }
        let mut previous_end: Option<&Timestamp> = None;
        for entry in &self.key_rotation_history {
            let key = decode_public_key(&entry.public_key)
                .map_err(|e| AttestError::InvalidIdentityDoc(e.to_string()))?;
            if Fingerprint::of_public_key(&key) != entry.fingerprint {
                return Err(AttestError::InvalidIdentityDoc(
                    "rotation history fingerprint does not match its public key".into(),
                ));
            }
            if !entry.valid_until.is_at_or_after(&entry.valid_from, 0) {
                return Err(AttestError::InvalidIdentityDoc(
                    "rotation period ends before it starts".into(),
                ));
            }
            if let Some(end) = previous_end {
                if !entry.valid_from.is_at_or_after(end, 0) {
                    return Err(AttestError::InvalidIdentityDoc(
                        "rotation periods overlap or are out of order".into(),
                    ));
                }
            }
            previous_end = Some(&entry.valid_until);
        }
        if let Some(end) = previous_end {
            if !self.key_valid_from.is_at_or_after(end, 0) {
                return Err(AttestError::InvalidIdentityDoc(
                    "current key validity starts before the last rotation ended".into(),
                ));
            }
        }
        Ok(())
    }

    /// The key active at `time`. Periods are `valid_from` inclusive,
    /// `valid_until` exclusive; at a rotation instant the new key applies.
    pub fn active_key_at(&self, time: &Timestamp) -> Result<[u8; PUBLIC_KEY_LEN], AttestError> {
        if time.is_at_or_after(&self.key_valid_from, 0) {
            return decode_public_key(&self.public_key)
                .map_err(|e| AttestError::InvalidIdentityDoc(e.to_string()));
        }
        for entry in &self.key_rotation_history {
            let starts_ok = time.is_at_or_after(&entry.valid_from, 0);
            let before_end = !time.is_at_or_after(&entry.valid_until, 0);
            if starts_ok && before_end {
                return decode_public_key(&entry.public_key)
                    .map_err(|e| AttestError::InvalidIdentityDoc(e.to_string()));
            }
        }
        Err(AttestError::NoKeyActive(time.as_str().to_owned()))
    }
}

/// Create a registry identity: fresh keypair, empty rotation history.
pub fn registry_init(
    registry_id: &str,
    registry_url: &str,
    namespaces: &[String],
    parent_registry: Option<String>,
    valid_from: Timestamp,
) -> Result<(RegistryIdentityDoc, KeyPair), AttestError> {
    for ns in namespaces {
        validate_namespace(ns)?;
    }
    let key_pair = KeyPair::generate().map_err(|e| AttestError::InvalidIdentityDoc(e.to_string()))?;
    let doc = identity_doc_for(
        registry_id,
        registry_url,
        namespaces,
        parent_registry,
        valid_from,
        &key_pair,
        Vec::new(),
    );
    Ok((doc, key_pair))
}

/// Deterministic variant used by tests and fixtures.
pub fn registry_init_with_key(
    registry_id: &str,
    registry_url: &str,
    namespaces: &[String],
    parent_registry: Option<String>,
    valid_from: Timestamp,
    key_pair: &KeyPair,
) -> Result<RegistryIdentityDoc, AttestError> {
    for ns in namespaces {
        validate_namespace(ns)?;
    }
    Ok(identity_doc_for(
        registry_id,
        registry_url,
        namespaces,
        parent_registry,
        valid_from,
        key_pair,
        Vec::new(),
    ))
}

fn identity_doc_for(
    registry_id: &str,
    registry_url: &str,
    namespaces: &[String],
    parent_registry: Option<String>,
    valid_from: Timestamp,
    key_pair: &KeyPair,
    history: Vec<RotatedKey>,
) -> RegistryIdentityDoc {
    RegistryIdentityDoc {
        registry_id: registry_id.to_owned(),
        registry_url: registry_url.to_owned(),
        public_key: encode_public_key(&key_pair.public_key()),
        key_fingerprint: key_pair.fingerprint(),
        namespaces: namespaces.to_vec(),
        parent_registry,
        key_valid_from: valid_from,
        key_rotation_history: history,
    }
}

/// Rotate to a new key: the current key moves into history with
/// `valid_until = rotation_time`, and the new key takes over from that
/// instant. Previously published attestations keep verifying through
/// [`RegistryIdentityDoc::active_key_at`].
pub fn rotate_key(
    doc: &RegistryIdentityDoc,
    new_key: &KeyPair,
    rotation_time: Timestamp,
) -> Result<RegistryIdentityDoc, AttestError> {
    if !rotation_time.is_at_or_after(&doc.key_valid_from, 0) {
        return Err(AttestError::RotationBeforeValidity {
            rotation: rotation_time.as_str().to_owned(),
            current: doc.key_valid_from.as_str().to_owned(),
        });
    }
    let mut history = doc.key_rotation_history.clone();
    history.push(RotatedKey {
        public_key: doc.public_key.clone(),
        fingerprint: doc.key_fingerprint,
        valid_from: doc.key_valid_from.clone(),
        valid_until: rotation_time.clone(),
    });
    let mut rotated = identity_doc_for(
        &doc.registry_id,
        &doc.registry_url,
        &doc.namespaces,
        doc.parent_registry.clone(),
        rotation_time,
        new_key,
        history,
    );
    rotated.namespaces = doc.namespaces.clone();
    Ok(rotated)
}

/// The attestation document `A`: what the registry asserts when it accepts an
/// artifact for distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryAttestation {
    pub registry_id: String,
    pub registry_url: String,
    pub registry_fingerprint: Fingerprint,
    pub manifest_hash: Digest256,
    pub namespace: String,
    pub artifact_name: String,
    pub version: String,
    pub accepted_at: Timestamp,
    /// The checks this registry performed, by name: `publisher_signature`,
    /// `content_hash`, `namespace_authorization`, `security_scan`. A skipped
    /// check is absent, not `false`.
    pub verification_results: BTreeMap<String, bool>,
}

impl RegistryAttestation {
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, AttestError> {
        Ok(canonical::canonical_json(self)?)
    }
}

/// `registry_attestation.json`: the attestation plus the registry signature
/// over its canonical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedAttestation {
    pub attestation: RegistryAttestation,
    pub signature: SignatureBytes,
}

/// The registry's record of who may publish where.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PublisherDirectory {
    pub entries: BTreeMap<String, PublisherEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PublisherEntry {
    pub publisher_id: String,
    pub public_key: String,
    pub namespaces: Vec<String>,
}

#[derive(Debug, Error)]
#[error("publisher {0} is already registered")]
pub struct DuplicatePublisher(pub Fingerprint);

impl PublisherDirectory {
    pub fn register(
        &mut self,
        publisher_id: &str,
        public_key: &[u8; PUBLIC_KEY_LEN],
        namespaces: Vec<String>,
    ) -> Result<Fingerprint, DuplicatePublisher> {
        let fingerprint = Fingerprint::of_public_key(public_key);
        let key = fingerprint.to_string();
        if self.entries.contains_key(&key) {
            return Err(DuplicatePublisher(fingerprint));
        }
        self.entries.insert(
            key,
            PublisherEntry {
                publisher_id: publisher_id.to_owned(),
                public_key: encode_public_key(public_key),
                namespaces,
            },
        );
        Ok(fingerprint)
    }

    pub fn lookup(&self, fingerprint: &Fingerprint) -> Option<&PublisherEntry> {
        self.entries.get(&fingerprint.to_string())
    }

    pub fn authorized(&self, fingerprint: &Fingerprint, namespace: &str) -> bool {
        self.lookup(fingerprint)
            .map(|e| e.namespaces.iter().any(|ns| ns == namespace))
            .unwrap_or(false)
    }
}

/// Hook run during publish when scanning is enabled; `false` rejects.
pub type ScanHook<'a> = &'a dyn Fn(&ProvenanceManifest, &[SourceFile]) -> bool;

/// Publish-time policy switches.
#[derive(Default)]
pub struct PublishOptions<'a> {
    /// When false, the namespace-authorization check is skipped entirely (the
    /// check is then absent from `verification_results`).
    pub skip_namespace_check: bool,
    pub scan: Option<ScanHook<'a>>,
}

/// The registry-side publish pipeline. Steps run in order and each failure is
/// a distinct rejection; nothing is stored by this function, so a rejection
/// leaves no artifact behind.
pub fn publish(
    artifact: &[u8],
    doc: &RegistryIdentityDoc,
    registry_key: &KeyPair,
    directory: &PublisherDirectory,
    accepted_at: Timestamp,
    options: &PublishOptions<'_>,
) -> Result<(Vec<u8>, SignedAttestation), PublishError> {
    if registry_key.fingerprint() != doc.key_fingerprint {
        return Err(AttestError::KeyMismatch.into());
    }
    let parsed = archive::read_envelope(artifact)?;
    if parsed.registry_attestation.is_some() {
        return Err(PublishError::DuplicateAttestation);
    }
    let manifest = &parsed.manifest;
    let sig = &parsed.publisher_sig;

    // Step 1: publisher signature against the registered key.
    let entry = directory
        .lookup(&sig.publisher_fingerprint)
        .ok_or(PublishError::UnknownPublisher(sig.publisher_fingerprint))?;
    let public_key = decode_public_key(&entry.public_key)
        .map_err(|e| PublishError::BadPublisherSignature(e.to_string()))?;
    verify_manifest_signature(manifest, sig, &public_key)
        .map_err(PublishError::BadPublisherSignature)?;

    // Step 2: recompute the content hash from the extracted sources.
    let files = parsed.unpack_contents(true)?;
    let computed = compute_content_hash(
        &manifest.name,
        &manifest.version,
        &manifest.pkg_id,
        files.iter().map(|f| (f.path.as_str(), f.bytes.as_slice())),
    )
    .map_err(ArchiveError::from)?;
    if computed != manifest.content_hash {
        return Err(PublishError::ContentHashMismatch {
            declared: manifest.content_hash,
            computed,
        });
    }

    // Step 3: namespace authorization.
    let mut verification_results = BTreeMap::new();
    verification_results.insert("publisher_signature".to_owned(), true);
    verification_results.insert("content_hash".to_owned(), true);
    if !options.skip_namespace_check {
        if !directory.authorized(&sig.publisher_fingerprint, &manifest.namespace) {
            return Err(PublishError::NamespaceUnauthorized {
                publisher: sig.publisher_fingerprint,
                namespace: manifest.namespace.clone(),
            });
        }
        verification_results.insert("namespace_authorization".to_owned(), true);
    }

    // Step 4: optional scan hook.
    if let Some(scan) = options.scan {
        if !scan(manifest, &files) {
            return Err(PublishError::ScanFailed);
        }
        verification_results.insert("security_scan".to_owned(), true);
    }

    if !accepted_at.is_at_or_after(&sig.signed_at, 0) {
        return Err(PublishError::ClockOrder {
            signed_at: sig.signed_at.as_str().to_owned(),
            accepted_at: accepted_at.as_str().to_owned(),
        });
    }

    // Steps 5 and 6: build and countersign the attestation, then inject it.
    let attestation = RegistryAttestation {
        registry_id: doc.registry_id.clone(),
        registry_url: doc.registry_url.clone(),
        registry_fingerprint: doc.key_fingerprint,
        manifest_hash: manifest.hash().map_err(ArchiveError::from)?,
        namespace: manifest.namespace.clone(),
        artifact_name: manifest.name.clone(),
        version: manifest.version.clone(),
        accepted_at,
        verification_results,
    };
    let signature = registry_key.sign(&attestation.canonical_bytes()?);
    let signed = SignedAttestation {
        attestation,
        signature,
    };
    let attested = archive::inject_attestation(artifact, &signed)?;
    Ok((attested, signed))
}

/// Diagnostic breakdown of a registry attestation check.
#[derive(Debug, Clone)]
pub struct AttestationCheck {
    pub signature_ok: bool,
    pub key_selected: Option<Fingerprint>,
    pub fingerprint_consistent: bool,
    pub manifest_hash_ok: bool,
    pub identity_ok: bool,
    pub temporal_ok: bool,
    pub failures: Vec<String>,
}

impl AttestationCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verify a registry attestation against the registry's identity document and
/// the manifest it claims to cover.
///
/// The verifying key is the one active at `accepted_at`, so artifacts
/// attested before a key rotation keep verifying afterwards. The temporal
/// rule is `accepted_at + skew >= signed_at` with a default skew of zero.
pub fn verify_attestation(
    signed: &SignedAttestation,
    doc: &RegistryIdentityDoc,
    manifest: &ProvenanceManifest,
    publisher_signed_at: &Timestamp,
    skew_seconds: i64,
) -> AttestationCheck {
    let attestation = &signed.attestation;
    let mut failures = Vec::new();

    let key = match doc.active_key_at(&attestation.accepted_at) {
        Ok(key) => Some(key),
        Err(e) => {
            failures.push(format!("key selection: {e}"));
            None
        }
    };
    let key_selected = key.map(|k| Fingerprint::of_public_key(&k));

    let signature_ok = match (key, attestation.canonical_bytes()) {
        (Some(key), Ok(bytes)) => identity::verify(&key, &bytes, signed.signature.as_bytes()),
        _ => false,
    };
    if !signature_ok {
        failures.push("registry signature does not verify".into());
    }

    let fingerprint_consistent = key_selected
        .map(|fp| fp == attestation.registry_fingerprint)
        .unwrap_or(false);
    if !fingerprint_consistent {
        failures.push("attestation fingerprint does not match the key active at accepted_at".into());
    }

    let manifest_hash_ok = manifest
        .hash()
        .map(|h| h == attestation.manifest_hash)
        .unwrap_or(false);
    if !manifest_hash_ok {
        failures.push("manifest hash in attestation does not match the manifest".into());
    }

    let identity_ok = attestation.registry_id == doc.registry_id
        && attestation.artifact_name == manifest.name
        && attestation.version == manifest.version
        && attestation.namespace == manifest.namespace;
    if !identity_ok {
        failures.push("attestation identity fields disagree with the document or manifest".into());
    }

    let temporal_ok = attestation
        .accepted_at
        .is_at_or_after(publisher_signed_at, skew_seconds);
    if !temporal_ok {
        failures.push(format!(
            "acceptance time {} precedes publisher signing time {}",
            attestation.accepted_at, publisher_signed_at
        ));
    }

    AttestationCheck {
        signature_ok,
        key_selected,
        fingerprint_consistent,
        manifest_hash_ok,
        identity_ok,
        temporal_ok,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{pack, read_envelope};
    use crate::manifest::{build_manifest, BuildOptions};
    use std::path::Path;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn demo_project(dir: &Path) {
        std::fs::write(
            dir.join("manifest.toml"),
            "[package]\nname = \"utils\"\nversion = \"1.2.0\"\nnamespace = \"@acme\"\n",
        )
        .unwrap();
        std::fs::create_dir_all(dir.join("src")).unwrap();
        std::fs::write(dir.join("src/lib.src"), "the library").unwrap();
    }

    struct Fixture {
        manifest: ProvenanceManifest,
        sources: Vec<SourceFile>,
        publisher: PublisherIdentity,
        sig: PublisherSignature,
        unpublished: Vec<u8>,
        doc: RegistryIdentityDoc,
        registry_key: KeyPair,
        directory: PublisherDirectory,
    }

    fn fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        demo_project(dir.path());
        let (manifest, sources) = build_manifest(
            dir.path(),
            BuildOptions {
                timestamp: ts("2026-02-01T09:00:00Z"),
                ..Default::default()
            },
        )
        .unwrap();
        let publisher = PublisherIdentity::new("pub_acme", KeyPair::from_seed([11u8; 32]));
        let sig = sign_manifest(&manifest, &publisher).unwrap();
        let unpublished = pack(&manifest, &sig, &sources).unwrap();

        let registry_key = KeyPair::from_seed([22u8; 32]);
        let doc = registry_init_with_key(
            "reg_acme",
            "https://registry.acme.test",
            &["@acme".to_owned()],
            None,
            ts("2026-01-01T00:00:00Z"),
            &registry_key,
        )
        .unwrap();
        let mut directory = PublisherDirectory::default();
        directory
            .register("pub_acme", &publisher.key_pair.public_key(), vec!["@acme".into()])
            .unwrap();

        Fixture {
            manifest,
            sources,
            publisher,
            sig,
            unpublished,
            doc,
            registry_key,
            directory,
        }
    }

    #[test]
    fn sign_and_verify_round_trip() {
        let f = fixture();
        verify_manifest_signature(&f.manifest, &f.sig, &f.publisher.key_pair.public_key()).unwrap();
    }

    #[test]
    fn any_manifest_mutation_invalidates_the_signature() {
        let f = fixture();
        let mut mutated = f.manifest.clone();
        mutated.version = "1.2.1".into();
        assert!(
            verify_manifest_signature(&mutated, &f.sig, &f.publisher.key_pair.public_key())
                .is_err()
        );
    }

    #[test]
    fn two_publishers_produce_distinct_key_bound_signatures() {
        let f = fixture();
        let other = PublisherIdentity::new("pub_other", KeyPair::from_seed([33u8; 32]));
        let other_sig = sign_manifest(&f.manifest, &other).unwrap();
        assert_ne!(other_sig.signature, f.sig.signature);
        verify_manifest_signature(&f.manifest, &other_sig, &other.key_pair.public_key()).unwrap();
        assert!(
            verify_manifest_signature(&f.manifest, &other_sig, &f.publisher.key_pair.public_key())
                .is_err()
        );
    }

    #[test]
    fn registry_init_declares_namespaces() {
        let (doc, _key) = registry_init(
            "reg_acme",
            "https://registry.acme.test",
            &["@acme".to_owned()],
            None,
            ts("2026-01-01T00:00:00Z"),
        )
        .unwrap();
        assert_eq!(doc.namespaces, vec!["@acme"]);
        assert!(doc.key_rotation_history.is_empty());
        doc.validate().unwrap();
    }

    #[test]
    fn registry_init_rejects_bad_namespace_syntax() {
        assert!(registry_init(
            "reg_x",
            "https://x",
            &["acme".to_owned()],
            None,
            ts("2026-01-01T00:00:00Z"),
        )
        .is_err());
    }

    #[test]
    fn rotation_keeps_history_contiguous() {
        let f = fixture();
        let new_key = KeyPair::from_seed([44u8; 32]);
        let rotated = rotate_key(&f.doc, &new_key, ts("2026-03-01T00:00:00Z")).unwrap();
        rotated.validate().unwrap();
        assert_eq!(rotated.key_rotation_history.len(), 1);
        let old = &rotated.key_rotation_history[0];
        assert_eq!(old.fingerprint, f.registry_key.fingerprint());
        assert_eq!(old.valid_until.as_str(), rotated.key_valid_from.as_str());

        // Boundary: at the rotation instant the new key applies.
        assert_eq!(
            rotated.active_key_at(&ts("2026-03-01T00:00:00Z")).unwrap(),
            new_key.public_key()
        );
        assert_eq!(
            rotated.active_key_at(&ts("2026-02-01T00:00:00Z")).unwrap(),
            f.registry_key.public_key()
        );
        assert_eq!(
            rotated.active_key_at(&ts("2026-04-01T00:00:00Z")).unwrap(),
            new_key.public_key()
        );
        assert!(matches!(
            rotated.active_key_at(&ts("2025-12-31T23:59:59Z")),
            Err(AttestError::NoKeyActive(_))
        ));
    }

    #[test]
    fn rotation_into_the_past_is_rejected() {
        let f = fixture();
        let new_key = KeyPair::from_seed([44u8; 32]);
        assert!(matches!(
            rotate_key(&f.doc, &new_key, ts("2025-06-01T00:00:00Z")),
            Err(AttestError::RotationBeforeValidity { .. })
        ));
    }

    #[test]
    fn publish_happy_path_attests_all_checks() {
        let f = fixture();
        let (attested, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();
        assert!(signed.attestation.verification_results["publisher_signature"]);
        assert!(signed.attestation.verification_results["content_hash"]);
        assert!(signed.attestation.verification_results["namespace_authorization"]);
        assert!(!signed.attestation.verification_results.contains_key("security_scan"));

        let parsed = read_envelope(&attested).unwrap();
        let roundtrip = parsed.registry_attestation.expect("attestation present");
        assert_eq!(roundtrip, signed);

        let check = verify_attestation(&signed, &f.doc, &f.manifest, &f.sig.signed_at, 0);
        assert!(check.passed(), "failures: {:?}", check.failures);
    }

    #[test]
    fn publish_rejects_unauthorized_namespace() {
        let f = fixture();
        let mut directory = PublisherDirectory::default();
        directory
            .register("pub_acme", &f.publisher.key_pair.public_key(), vec!["@other".into()])
            .unwrap();
        let err = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::NamespaceUnauthorized { .. }));
    }

    #[test]
    fn publish_rejects_altered_manifest() {
        let f = fixture();
        // Rewrite provenance.json after signing.
        let mut entries = archive::raw_entries(&f.unpublished).unwrap();
        let mut altered = f.manifest.clone();
        altered.version = "9.9.9".into();
        entries[0].1 = canonical::canonical_json(&altered).unwrap();
        let tampered = archive::from_raw_entries(&entries).unwrap();
        let err = publish(
            &tampered,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::BadPublisherSignature(_)));
    }

    #[test]
    fn publish_rejects_unknown_publisher() {
        let f = fixture();
        let err = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &PublisherDirectory::default(),
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::UnknownPublisher(_)));
    }

    #[test]
    fn publish_rejects_content_hash_drift() {
        let f = fixture();
        // Manifest with a bogus content hash, re-signed so the signature
        // holds. The per-file checksums stay intact, so pack accepts it and
        // the registry's recomputation is what catches the drift.
        let mut altered = f.manifest.clone();
        altered.content_hash = canonical::sha256(b"not the content");
        let sig = sign_manifest(&altered, &f.publisher).unwrap();
        let repacked = pack(&altered, &sig, &f.sources).unwrap();
        let err = publish(
            &repacked,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::ContentHashMismatch { .. }));
    }

    #[test]
    fn publish_rejects_duplicate_attestation() {
        let f = fixture();
        let (attested, _) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();
        let err = publish(
            &attested,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:06:00Z"),
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::DuplicateAttestation));
    }

    #[test]
    fn scan_hook_can_reject() {
        let f = fixture();
        let deny: ScanHook<'_> = &|_, _| false;
        let err = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions {
                scan: Some(deny),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::ScanFailed));

        let allow: ScanHook<'_> = &|_, _| true;
        let (_, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions {
                scan: Some(allow),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(signed.attestation.verification_results["security_scan"]);
    }

    #[test]
    fn attestation_with_reversed_timestamps_fails_verification() {
        let f = fixture();
        let err = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T08:59:59Z"), // before signed_at
            &PublishOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PublishError::ClockOrder { .. }));

        // Equality at the same second is allowed.
        let (_, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:00:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();
        let check = verify_attestation(&signed, &f.doc, &f.manifest, &f.sig.signed_at, 0);
        assert!(check.passed());

        // A hand-built attestation that claims acceptance before signing
        // fails the temporal check.
        let mut early = signed.clone();
        early.attestation.accepted_at = ts("2026-02-01T08:00:00Z");
        early.signature = f.registry_key.sign(&early.attestation.canonical_bytes().unwrap());
        let check = verify_attestation(&early, &f.doc, &f.manifest, &f.sig.signed_at, 0);
        assert!(!check.temporal_ok);
        assert!(!check.passed());
    }

    #[test]
    fn attestation_signed_by_wrong_key_fails() {
        let f = fixture();
        let (_, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();
        let mut forged = signed.clone();
        let attacker = KeyPair::from_seed([99u8; 32]);
        forged.signature = attacker.sign(&forged.attestation.canonical_bytes().unwrap());
        let check = verify_attestation(&forged, &f.doc, &f.manifest, &f.sig.signed_at, 0);
        assert!(!check.signature_ok);
    }

    #[test]
    fn attestations_verify_under_exactly_one_key() {
        // Non-repudiation at desk scale: over a set of candidate keys, the
        // publisher signature and the registry signature each verify under
        // exactly one.
        let f = fixture();
        let (_, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();

        let candidates: Vec<KeyPair> = (0u8..8).map(|i| KeyPair::from_seed([i; 32])).collect();
        let manifest_bytes = canonical::canonical_json(&f.manifest).unwrap();
        let attestation_bytes = signed.attestation.canonical_bytes().unwrap();

        let mut publisher_hits = 0;
        let mut registry_hits = 0;
        for key in candidates
            .iter()
            .chain([&f.publisher.key_pair, &f.registry_key])
        {
            if identity::verify(&key.public_key(), &manifest_bytes, f.sig.signature.as_bytes()) {
                publisher_hits += 1;
            }
            if identity::verify(&key.public_key(), &attestation_bytes, signed.signature.as_bytes())
            {
                registry_hits += 1;
            }
        }
        assert_eq!(publisher_hits, 1);
        assert_eq!(registry_hits, 1);
    }

    #[test]
    fn attestation_embeds_the_manifest_hash() {
        let f = fixture();
        let (_, signed) = publish(
            &f.unpublished,
            &f.doc,
            &f.registry_key,
            &f.directory,
            ts("2026-02-01T09:05:00Z"),
            &PublishOptions::default(),
        )
        .unwrap();
        assert_eq!(signed.attestation.manifest_hash, f.manifest.hash().unwrap());
    }
}
