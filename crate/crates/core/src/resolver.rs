//! Consumer-side configuration and resolution with enforcement.
//!
//! `mashin.toml` declares which registries exist and which namespaces each is
//! authoritative for. Resolution of `@ns/name` consults the binding, queries
//! exactly one registry, reads the downloaded envelope without decompressing,
//! verifies the publisher signature and the registry attestation (including
//! the pinned-fingerprint comparison for authoritative namespaces), and only
//! then extracts and checks content. Every failure is a distinct, step-tagged
//! rejection, and nothing is extracted before the envelope checks pass.
//!
//! Pins live in the separate TOFU store. For an authoritative namespace a
//! missing pin is a hard failure, not a silent first-use pin; the only seed
//! path is an explicit `fingerprint` key on the binding, which records a
//! first-use pin before resolution proceeds.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{self, PackagedArtifact};
use crate::attestation::RegistryIdentityDoc;
use crate::canonical::{self, Digest256};
use crate::identity::{Fingerprint, PUBLIC_KEY_LEN};
use crate::manifest::{validate_namespace, SourceFile};
use crate::timestamp::Timestamp;
use crate::tofu::{tofu_check, PinMode, TofuDecision, TofuStore};
use crate::verifier::{self, Mode, VerificationReport, VerifyContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    Authoritative,
    Default,
}

/// One `[registries.<alias>]` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryBinding {
    pub alias: String,
    pub url: String,
    /// Optional initial pin; used only to seed a first-use TOFU entry.
    pub fingerprint: Option<Fingerprint>,
    pub namespaces: Vec<String>,
    pub priority: Priority,
}

#[derive(Debug, Clone, Default)]
pub struct ConsumerConfig {
    pub bindings: Vec<RegistryBinding>,
    pub default_registry: Option<String>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("namespace {namespace} is claimed authoritatively by both {first} and {second}")]
    DuplicateAuthority {
        namespace: String,
        first: String,
        second: String,
    },
    #[error("default_registry {0:?} does not name a configured registry")]
    UnknownDefault(String),
    #[error("invalid namespace in config: {0}")]
    BadNamespace(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    default_registry: Option<String>,
    #[serde(default)]
    registries: BTreeMap<String, BindingFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingFile {
    url: String,
    #[serde(default)]
    fingerprint: Option<String>,
    #[serde(default)]
    namespaces: Vec<String>,
    #[serde(default)]
    priority: Option<String>,
}

/// Parse `mashin.toml`. Unknown keys are rejected; so is a namespace claimed
/// authoritatively by two bindings.
pub fn parse_config(text: &str) -> Result<ConsumerConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut bindings = Vec::new();
    let mut authority: BTreeMap<String, String> = BTreeMap::new();
    for (alias, raw) in file.registries {
        let priority = match raw.priority.as_deref() {
            Some("authoritative") => Priority::Authoritative,
            None | Some("default") => Priority::Default,
            Some(other) => {
                return Err(ConfigError::Syntax(format!(
                    "priority must be \"authoritative\" or \"default\", got {other:?}"
                )))
            }
        };
        for ns in &raw.namespaces {
            validate_namespace(ns).map_err(|_| ConfigError::BadNamespace(ns.clone()))?;
            if priority == Priority::Authoritative {
                if let Some(previous) = authority.insert(ns.clone(), alias.clone()) {
                    return Err(ConfigError::DuplicateAuthority {
                        namespace: ns.clone(),
                        first: previous,
                        second: alias.clone(),
                    });
                }
            }
        }
        let fingerprint = raw
            .fingerprint
            .map(|s| Fingerprint::parse(&s).map_err(|e| ConfigError::Syntax(e.to_string())))
            .transpose()?;
        bindings.push(RegistryBinding {
            alias: alias.clone(),
            url: raw.url,
            fingerprint,
            namespaces: raw.namespaces,
            priority,
        });
    }
    if let Some(default) = &file.default_registry {
        if !bindings.iter().any(|b| &b.alias == default) {
            return Err(ConfigError::UnknownDefault(default.clone()));
        }
    }
    Ok(ConsumerConfig {
        bindings,
        default_registry: file.default_registry,
    })
}

/// The binding that serves a namespace, and whether it is authoritative.
///
/// An authoritative claim wins; otherwise a binding listing the namespace;
/// otherwise the configured default registry.
pub fn binding_for<'a>(
    config: &'a ConsumerConfig,
    namespace: &str,
) -> Option<(&'a RegistryBinding, bool)> {
    if let Some(binding) = config
        .bindings
        .iter()
        .find(|b| b.priority == Priority::Authoritative && b.namespaces.iter().any(|n| n == namespace))
    {
        return Some((binding, true));
    }
    if let Some(binding) = config
        .bindings
        .iter()
        .find(|b| b.namespaces.iter().any(|n| n == namespace))
    {
        return Some((binding, false));
    }
    config
        .default_registry
        .as_ref()
        .and_then(|alias| config.bindings.iter().find(|b| &b.alias == alias))
        .map(|b| (b, false))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyRequest {
    pub namespace: String,
    pub name: String,
    pub version_constraint: String,
}

/// A version a registry advertises.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionEntry {
    pub version: String,
    pub manifest_hash: Digest256,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("registry {url} unreachable: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("registry {url} protocol error: {reason}")]
    Protocol { url: String, reason: String },
}

/// Client-side transport to a registry. Implementations exist over HTTP and
/// in-process for tests and simulations.
pub trait RegistryFetcher {
    fn fetch_identity(&self, url: &str) -> Result<RegistryIdentityDoc, FetchError>;
    fn list_versions(
        &self,
        url: &str,
        namespace: &str,
        name: &str,
    ) -> Result<Vec<VersionEntry>, FetchError>;
    fn fetch_artifact(
        &self,
        url: &str,
        namespace: &str,
        name: &str,
        version: &str,
    ) -> Result<Vec<u8>, FetchError>;
    fn fetch_publisher_key(
        &self,
        url: &str,
        fingerprint: &Fingerprint,
    ) -> Result<[u8; PUBLIC_KEY_LEN], FetchError>;
}

/// What a fetcher was asked to do; recorded by [`RecordingFetcher`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchEvent {
    pub url: String,
    pub operation: &'static str,
    pub target: String,
}

/// Wraps a fetcher and records every request, for asserting the
/// query-restriction property (an authoritative namespace never causes
/// requests to any other registry).
pub struct RecordingFetcher<F> {
    inner: F,
    log: Mutex<Vec<FetchEvent>>,
}

impl<F> RecordingFetcher<F> {
    pub fn new(inner: F) -> Self {
        RecordingFetcher {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn events(&self) -> Vec<FetchEvent> {
        self.log.lock().expect("fetch log").clone()
    }

    fn record(&self, url: &str, operation: &'static str, target: String) {
        self.log.lock().expect("fetch log").push(FetchEvent {
            url: url.to_owned(),
            operation,
            target,
        });
    }
}

impl<F: RegistryFetcher> RegistryFetcher for RecordingFetcher<F> {
    fn fetch_identity(&self, url: &str) -> Result<RegistryIdentityDoc, FetchError> {
        self.record(url, "identity", String::new());
        self.inner.fetch_identity(url)
    }

    fn list_versions(
        &self,
        url: &str,
        namespace: &str,
        name: &str,
    ) -> Result<Vec<VersionEntry>, FetchError> {
        self.record(url, "list", format!("{namespace}/{name}"));
        self.inner.list_versions(url, namespace, name)
    }

    fn fetch_artifact(
        &self,
        url: &str,
        namespace: &str,
        name: &str,
        version: &str,
    ) -> Result<Vec<u8>, FetchError> {
        self.record(url, "artifact", format!("{namespace}/{name}@{version}"));
        self.inner.fetch_artifact(url, namespace, name, version)
    }

    fn fetch_publisher_key(
        &self,
        url: &str,
        fingerprint: &Fingerprint,
    ) -> Result<[u8; PUBLIC_KEY_LEN], FetchError> {
        self.record(url, "publisher_key", fingerprint.to_string());
        self.inner.fetch_publisher_key(url, fingerprint)
    }
}

/// The resolution step that rejected, for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveStep {
    SelectBinding,
    RegistryIdentity,
    TofuPin,
    QueryVersions,
    Download,
    ReadEnvelope,
    PublisherSignature,
    RegistryAttestation,
    ContentVerification,
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("no registry is configured for namespace {0}")]
    NoRegistryForNamespace(String),
    #[error("registry identity for {url} rejected: {reason}")]
    BadRegistryIdentity { url: String, reason: String },
    #[error(
        "namespace {namespace} is authoritatively bound to {url} (registry {registry_id}) but no \
         fingerprint is pinned; pin the registry explicitly before resolving"
    )]
    MissingPin {
        namespace: String,
        url: String,
        registry_id: String,
    },
    #[error("no version of {namespace}/{name} matches {constraint:?} (available: {available:?})")]
    NoMatchingVersion {
        namespace: String,
        name: String,
        constraint: String,
        available: Vec<String>,
    },
    #[error("invalid version constraint {0:?}: {1}")]
    BadConstraint(String, String),
    #[error("fetch failed: {0}")]
    Fetch(#[from] FetchError),
    #[error("downloaded envelope rejected: {0}")]
    Envelope(#[from] archive::ArchiveError),
    #[error("publisher signature rejected: {0}")]
    PublisherSignature(String),
    #[error("artifact does not match the request: {0}")]
    WrongArtifact(String),
    #[error("registry attestation rejected: {0}")]
    Attestation(String),
    #[error("pinned fingerprint mismatch: attestation carries {attested}, pin is {pinned}")]
    TofuMismatch {
        attested: Fingerprint,
        pinned: Fingerprint,
    },
    #[error("attestation namespace {attested:?} does not match requested {requested:?}")]
    NamespaceMismatch { attested: String, requested: String },
    #[error("content verification failed at level {level}: {detail}")]
    ContentRejected { level: u8, detail: String },
}

impl ResolveError {
    /// Which of the resolution steps rejected.
    pub fn step(&self) -> ResolveStep {
        match self {
            ResolveError::NoRegistryForNamespace(_) => ResolveStep::SelectBinding,
            ResolveError::BadRegistryIdentity { .. } => ResolveStep::RegistryIdentity,
            ResolveError::MissingPin { .. } => ResolveStep::TofuPin,
            ResolveError::NoMatchingVersion { .. } | ResolveError::BadConstraint(..) => {
                ResolveStep::QueryVersions
            }
            ResolveError::Fetch(_) => ResolveStep::Download,
            ResolveError::Envelope(_) => ResolveStep::ReadEnvelope,
            ResolveError::PublisherSignature(_) | ResolveError::WrongArtifact(_) => {
                ResolveStep::PublisherSignature
            }
            ResolveError::Attestation(_)
            | ResolveError::TofuMismatch { .. }
            | ResolveError::NamespaceMismatch { .. } => ResolveStep::RegistryAttestation,
            ResolveError::ContentRejected { .. } => ResolveStep::ContentVerification,
        }
    }
}

/// One line of the lock record: which registry distributed what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockEntry {
    pub namespace: String,
    pub name: String,
    pub version: String,
    pub content_hash: Digest256,
    pub registry_fingerprint: Fingerprint,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LockRecord {
    pub entries: Vec<LockEntry>,
}

impl LockRecord {
    pub fn load(path: &std::path::Path) -> Result<Self, std::io::Error> {
        match std::fs::read(path) {
            Ok(bytes) => canonical::from_canonical_json(&bytes)
                .map_err(|e| std::io::Error::other(format!("lock record: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(LockRecord::default()),
            Err(e) => Err(e),
        }
    }

    /// Insert or replace the entry for (namespace, name), keeping the record
    /// sorted.
    pub fn upsert(&mut self, entry: LockEntry) {
        self.entries
            .retain(|e| !(e.namespace == entry.namespace && e.name == entry.name));
        self.entries.push(entry);
        self.entries
            .sort_by(|a, b| (&a.namespace, &a.name).cmp(&(&b.namespace, &b.name)));
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        let bytes = canonical::canonical_json(self).expect("lock record serializes");
        crate::tofu::atomic_write(path, &bytes)
    }
}

/// A successful resolution: the verified artifact, its files, the report, and
/// the lock entry to record.
pub struct Resolution {
    pub artifact: PackagedArtifact,
    pub files: Vec<SourceFile>,
    pub report: VerificationReport,
    pub lock_entry: LockEntry,
    pub registry_url: String,
    pub registry_id: String,
    pub authoritative: bool,
}

/// Pick the highest version satisfying the constraint. Bare versions mean
/// exact equality, `=x.y.z` likewise, `^x.y.z` is a caret range, `*` matches
/// anything.
pub fn select_version(
    entries: &[VersionEntry],
    constraint: &str,
) -> Result<Option<String>, ResolveError> {
    enum Rule {
        Exact(semver::Version),
        Range(semver::VersionReq),
    }
    let rule = if constraint == "*" {
        Rule::Range(semver::VersionReq::STAR)
    } else if let Some(rest) = constraint.strip_prefix('=') {
        Rule::Exact(
            semver::Version::parse(rest.trim())
                .map_err(|e| ResolveError::BadConstraint(constraint.into(), e.to_string()))?,
        )
    } else if constraint.starts_with('^') {
        Rule::Range(
            semver::VersionReq::parse(constraint)
                .map_err(|e| ResolveError::BadConstraint(constraint.into(), e.to_string()))?,
        )
    } else {
        Rule::Exact(
            semver::Version::parse(constraint)
                .map_err(|e| ResolveError::BadConstraint(constraint.into(), e.to_string()))?,
        )
    };

    let mut best: Option<semver::Version> = None;
    for entry in entries {
        let Ok(version) = semver::Version::parse(&entry.version) else {
            continue;
        };
        let matches = match &rule {
            Rule::Exact(want) => &version == want,
            Rule::Range(req) => req.matches(&version),
        };
        if matches && best.as_ref().is_none_or(|b| version > *b) {
            best = Some(version);
        }
    }
    Ok(best.map(|v| v.to_string()))
}

/// Resolve one dependency with full enforcement.
pub fn resolve(
    request: &DependencyRequest,
    config: &ConsumerConfig,
    tofu: &mut TofuStore,
    fetcher: &dyn RegistryFetcher,
) -> Result<Resolution, ResolveError> {
    // Step 1: select the binding.
    let (binding, authoritative) = binding_for(config, &request.namespace)
        .ok_or_else(|| ResolveError::NoRegistryForNamespace(request.namespace.clone()))?;

    // Step 2: registry identity, and the pin when authoritative.
    let doc = fetcher.fetch_identity(&binding.url)?;
    doc.validate().map_err(|e| ResolveError::BadRegistryIdentity {
        url: binding.url.clone(),
        reason: e.to_string(),
    })?;
    if authoritative && !doc.namespaces.iter().any(|n| n == &request.namespace) {
        return Err(ResolveError::BadRegistryIdentity {
            url: binding.url.clone(),
            reason: format!(
                "registry {} does not claim authority over {}",
                doc.registry_id, request.namespace
            ),
        });
    }

    let pinned: Option<Fingerprint> = if authoritative {
        let existing = tofu.entry(&doc.registry_id).map(|e| e.fingerprint);
        match (existing, binding.fingerprint) {
            (Some(fp), _) => Some(fp),
            (None, Some(seed)) => {
                // Seed a first-use pin from the config, then trust whatever
                // actually landed in the store (a concurrent pin wins).
                let _ = tofu.pin(
                    &doc.registry_id,
                    &binding.url,
                    seed,
                    PinMode::FirstUse,
                    Timestamp::now(),
                );
                tofu.reload().ok();
                Some(
                    tofu.entry(&doc.registry_id)
                        .map(|e| e.fingerprint)
                        .unwrap_or(seed),
                )
            }
            (None, None) => {
                return Err(ResolveError::MissingPin {
                    namespace: request.namespace.clone(),
                    url: binding.url.clone(),
                    registry_id: doc.registry_id.clone(),
                })
            }
        }
    } else {
        None
    };

    // Step 3: query exactly this registry.
    let available = fetcher.list_versions(&binding.url, &request.namespace, &request.name)?;
    let version = select_version(&available, &request.version_constraint)?.ok_or_else(|| {
        ResolveError::NoMatchingVersion {
            namespace: request.namespace.clone(),
            name: request.name.clone(),
            constraint: request.version_constraint.clone(),
            available: available.iter().map(|e| e.version.clone()).collect(),
        }
    })?;

    // Step 4: download and read the envelope (no decompression).
    let bytes = fetcher.fetch_artifact(&binding.url, &request.namespace, &request.name, &version)?;
    let artifact = archive::read_envelope(&bytes)?;
    if artifact.manifest.namespace != request.namespace
        || artifact.manifest.name != request.name
        || artifact.manifest.version != version
    {
        return Err(ResolveError::WrongArtifact(format!(
            "requested {}/{}@{version}, manifest says {}/{}@{}",
            request.namespace,
            request.name,
            artifact.manifest.namespace,
            artifact.manifest.name,
            artifact.manifest.version
        )));
    }

    // Step 5: publisher signature.
    let publisher_key =
        fetcher.fetch_publisher_key(&binding.url, &artifact.publisher_sig.publisher_fingerprint)?;
    crate::attestation::verify_manifest_signature(
        &artifact.manifest,
        &artifact.publisher_sig,
        &publisher_key,
    )
    .map_err(ResolveError::PublisherSignature)?;

    // Step 6: registry attestation, TOFU, namespace.
    let Some(signed) = &artifact.registry_attestation else {
        return Err(ResolveError::Attestation(
            "artifact carries no registry attestation".into(),
        ));
    };
    let check = crate::attestation::verify_attestation(
        signed,
        &doc,
        &artifact.manifest,
        &artifact.publisher_sig.signed_at,
        0,
    );
    if !check.passed() {
        return Err(ResolveError::Attestation(check.failures.join("; ")));
    }
    if let Some(pinned) = pinned {
        if tofu_check(&signed.attestation.registry_fingerprint, &pinned) == TofuDecision::Reject {
            return Err(ResolveError::TofuMismatch {
                attested: signed.attestation.registry_fingerprint,
                pinned,
            });
        }
    }
    if signed.attestation.namespace != request.namespace {
        return Err(ResolveError::NamespaceMismatch {
            attested: signed.attestation.namespace.clone(),
            requested: request.namespace.clone(),
        });
    }

    // Step 7: extract (checksum-checked) and verify content.
    let files = artifact.unpack_contents(true).map_err(|e| match e {
        archive::ArchiveError::ChecksumMismatch { .. } => ResolveError::ContentRejected {
            level: 4,
            detail: e.to_string(),
        },
        other => ResolveError::ContentRejected {
            level: 1,
            detail: other.to_string(),
        },
    })?;
    let level1 = verifier::verify_level1(&artifact.manifest, &files);
    if !level1.passed {
        return Err(ResolveError::ContentRejected {
            level: 1,
            detail: level1.detail,
        });
    }
    let level2 = verifier::verify_level2(&artifact.manifest, &files);
    if !level2.passed {
        return Err(ResolveError::ContentRejected {
            level: 2,
            detail: level2.detail,
        });
    }

    // Assemble the strict-mode report from the same context.
    let report = verifier::verify(
        &artifact,
        Mode::Strict,
        &VerifyContext {
            publisher_key: Some(publisher_key),
            registry_doc: Some(&doc),
            pinned,
            expected_namespace: Some(request.namespace.clone()),
            ledger: None,
            skew_seconds: 0,
        },
    )
    .expect("context is complete for strict mode");

    let lock_entry = LockEntry {
        namespace: request.namespace.clone(),
        name: request.name.clone(),
        version: version.clone(),
        content_hash: artifact.manifest.content_hash,
        registry_fingerprint: signed.attestation.registry_fingerprint,
    };
    Ok(Resolution {
        files,
        report,
        lock_entry,
        registry_url: binding.url.clone(),
        registry_id: doc.registry_id.clone(),
        authoritative,
        artifact,
    })
}

/// A post-install audit finding: an installed artifact whose distributing
/// registry's fingerprint contradicts a pinned registry claiming the same
/// namespace.
#[derive(Debug, Clone)]
pub struct AuditFinding {
    pub namespace: String,
    pub name: String,
    pub installed_fingerprint: Fingerprint,
    pub pinned_registry_id: String,
    pub pinned_fingerprint: Fingerprint,
    pub detail: String,
}

/// Audit a lock record against the pin store.
///
/// For every pinned registry, its current identity document is fetched from
/// the pinned URL; any installed artifact whose namespace that registry
/// claims must carry the pinned fingerprint. This is the post-installation
/// auditability path for namespaces that were resolved without a binding.
pub fn audit_lock(
    lock: &LockRecord,
    tofu: &TofuStore,
    fetcher: &dyn RegistryFetcher,
) -> Vec<AuditFinding> {
    let mut findings = Vec::new();
    for (registry_id, pin) in tofu.entries() {
        let Ok(doc) = fetcher.fetch_identity(&pin.url) else {
            continue;
        };
        for entry in &lock.entries {
            let claimed = doc.namespaces.iter().any(|n| n == &entry.namespace);
            if claimed && entry.registry_fingerprint != pin.fingerprint {
                findings.push(AuditFinding {
                    namespace: entry.namespace.clone(),
                    name: entry.name.clone(),
                    installed_fingerprint: entry.registry_fingerprint,
                    pinned_registry_id: registry_id.clone(),
                    pinned_fingerprint: pin.fingerprint,
                    detail: format!(
                        "{}/{}@{} was distributed by {} but namespace {} is claimed by pinned \
                         registry {} ({})",
                        entry.namespace,
                        entry.name,
                        entry.version,
                        entry.registry_fingerprint,
                        entry.namespace,
                        registry_id,
                        pin.fingerprint
                    ),
                });
            }
        }
    }
    findings
}

/// The consumer configuration file name.
pub const CONFIG_FILE: &str = "mashin.toml";
