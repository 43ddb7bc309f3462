//! Pack and unpack the two-layer artifact.
//!
//! Layout of a `.pkg` file — an uncompressed outer tar whose entries appear
//! in this fixed order:
//!
//! ```text
//! provenance.json            provenance manifest (canonical JSON)
//! signature.json             publisher signature document
//! registry_attestation.json  registry countersignature (present once published)
//! CHECKSUM                   lowercase hex SHA-256 of contents.tar.gz + '\n'
//! contents.tar.gz            gzipped tar of the source files
//! ```
//!
//! The outer envelope is readable and verifiable without decompressing the
//! inner archive; unknown or out-of-order entries are rejected outright so
//! the attestation always covers a closed envelope.

use std::cell::Cell;
use std::io::{Read as _, Write as _};
use std::path::Path;

use flate2::{read::GzDecoder, write::GzEncoder, Compression};
use thiserror::Error;

use crate::attestation::{PublisherSignature, SignedAttestation};
use crate::canonical::{self, Digest256};
use crate::manifest::{ManifestError, ProvenanceManifest, SourceFile};
use crate::ustar;

pub const ENTRY_MANIFEST: &str = "provenance.json";
pub const ENTRY_SIGNATURE: &str = "signature.json";
pub const ENTRY_ATTESTATION: &str = "registry_attestation.json";
pub const ENTRY_CHECKSUM: &str = "CHECKSUM";
pub const ENTRY_CONTENTS: &str = "contents.tar.gz";

/// Artifact file extension.
pub const PKG_EXTENSION: &str = "pkg";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),
    #[error("envelope document {entry} invalid: {reason}")]
    BadDocument { entry: String, reason: String },
    #[error("manifest checksum for {path:?} does not match the provided source bytes")]
    SourceChecksumMismatch { path: String },
    #[error("manifest and sources disagree on the file set: {0}")]
    SourceSetMismatch(String),
    #[error("artifact has no source files")]
    EmptySources,
    #[error("inner archive checksum mismatch: CHECKSUM says {expected}, contents hash to {actual}")]
    ChecksumMismatch {
        expected: Digest256,
        actual: Digest256,
    },
    #[error("attestation already present")]
    DuplicateAttestation,
    #[error("gzip stream corrupt: {0}")]
    GzipCorrupt(String),
    #[error("inner archive entry {0:?} escapes the extraction root")]
    PathEscape(String),
    #[error("tar format error: {0}")]
    Tar(#[from] ustar::UstarError),
    #[error("manifest error: {0}")]
    Manifest(#[from] ManifestError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

thread_local! {
    static DECOMPRESSIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of gzip decompressions performed on this thread. Instrumentation
/// for tests asserting that envelope reads never touch the inner archive.
pub fn decompression_count() -> u64 {
    DECOMPRESSIONS.with(|c| c.get())
}

/// A parsed artifact: envelope documents plus the still-compressed contents.
#[derive(Debug)]
pub struct PackagedArtifact {
    pub manifest: ProvenanceManifest,
    pub publisher_sig: PublisherSignature,
    pub registry_attestation: Option<SignedAttestation>,
    /// The digest recorded in the CHECKSUM entry.
    pub checksum: Digest256,
    /// Raw bytes of `contents.tar.gz`, untouched by [`read_envelope`].
    pub contents: Vec<u8>,
}

impl PackagedArtifact {
    /// Does the CHECKSUM entry match the actual compressed contents?
    pub fn checksum_matches(&self) -> bool {
        canonical::sha256(&self.contents) == self.checksum
    }

    /// Decompress and untar the inner archive in memory.
    ///
    /// With `enforce_checksum`, a CHECKSUM mismatch is reported before any
    /// decompression happens. Entry paths are validated against escapes in
    /// either mode.
    pub fn unpack_contents(&self, enforce_checksum: bool) -> Result<Vec<SourceFile>, ArchiveError> {
        if enforce_checksum && !self.checksum_matches() {
            return Err(ArchiveError::ChecksumMismatch {
                expected: self.checksum,
                actual: canonical::sha256(&self.contents),
            });
        }
        let tar_bytes = gunzip(&self.contents)?;
        let entries = ustar::read_archive(&tar_bytes)?;
        let mut files = Vec::with_capacity(entries.len());
        for (path, bytes) in entries {
            validate_extraction_path(&path)?;
            files.push(SourceFile { path, bytes });
        }
        Ok(files)
    }

    /// Unpack and write the files under `dest`, creating parent directories.
    pub fn extract_contents(
        &self,
        dest: &Path,
        enforce_checksum: bool,
    ) -> Result<Vec<SourceFile>, ArchiveError> {
        let files = self.unpack_contents(enforce_checksum)?;
        for file in &files {
            let target = dest.join(&file.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, &file.bytes)?;
        }
        Ok(files)
    }
}

/// Build the unpublished artifact bytes. Pure: identical inputs produce
/// byte-identical output.
///
/// The manifest's per-file checksums must cover exactly the given sources.
pub fn pack(
    manifest: &ProvenanceManifest,
    publisher_sig: &PublisherSignature,
    sources: &[SourceFile],
) -> Result<Vec<u8>, ArchiveError> {
    if sources.is_empty() {
        return Err(ArchiveError::EmptySources);
    }
    check_sources_against_manifest(manifest, sources)?;

    let mut sorted: Vec<&SourceFile> = sources.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let inner_entries: Vec<(&str, &[u8])> = sorted
        .iter()
        .map(|f| (f.path.as_str(), f.bytes.as_slice()))
        .collect();
    let inner_tar = ustar::write_archive(&inner_entries)?;
    let contents = gzip_deterministic(&inner_tar);

    let checksum = canonical::sha256(&contents);
    let manifest_bytes = manifest.canonical_bytes()?;
    let signature_bytes = canonical::canonical_json(publisher_sig)
        .map_err(|e| ArchiveError::BadDocument {
            entry: ENTRY_SIGNATURE.into(),
            reason: e.to_string(),
        })?;
    let checksum_line = format!("{}\n", checksum.to_hex());

    let outer: Vec<(&str, &[u8])> = vec![
        (ENTRY_MANIFEST, manifest_bytes.as_slice()),
        (ENTRY_SIGNATURE, signature_bytes.as_slice()),
        (ENTRY_CHECKSUM, checksum_line.as_bytes()),
        (ENTRY_CONTENTS, contents.as_slice()),
    ];
    Ok(ustar::write_archive(&outer)?)
}

fn check_sources_against_manifest(
    manifest: &ProvenanceManifest,
    sources: &[SourceFile],
) -> Result<(), ArchiveError> {
    let checksums = manifest.checksums();
    if checksums.len() != sources.len() {
        return Err(ArchiveError::SourceSetMismatch(format!(
            "manifest lists {} files, {} provided",
            checksums.len(),
            sources.len()
        )));
    }
    for file in sources {
        match checksums.get(file.path.as_str()) {
            None => {
                return Err(ArchiveError::SourceSetMismatch(format!(
                    "{:?} not listed in manifest",
                    file.path
                )))
            }
            Some(expected) if *expected != canonical::sha256(&file.bytes) => {
                return Err(ArchiveError::SourceChecksumMismatch {
                    path: file.path.clone(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Parse the outer envelope without decompressing the inner archive.
///
/// The entry order is exactly the fixed layout; missing, reordered, repeated,
/// or unknown entries are malformed.
pub fn read_envelope(bytes: &[u8]) -> Result<PackagedArtifact, ArchiveError> {
    let entries = ustar::read_archive(bytes)?;
    let names: Vec<&str> = entries.iter().map(|(n, _)| n.as_str()).collect();

    let expected_without: [&str; 4] = [ENTRY_MANIFEST, ENTRY_SIGNATURE, ENTRY_CHECKSUM, ENTRY_CONTENTS];
    let expected_with: [&str; 5] = [
        ENTRY_MANIFEST,
        ENTRY_SIGNATURE,
        ENTRY_ATTESTATION,
        ENTRY_CHECKSUM,
        ENTRY_CONTENTS,
    ];
    let has_attestation = match names.as_slice() {
        n if n == expected_without => false,
        n if n == expected_with => true,
        _ => {
            return Err(ArchiveError::MalformedEnvelope(format!(
                "expected the fixed envelope layout, found entries {names:?}"
            )))
        }
    };

    let mut iter = entries.into_iter();
    let (_, manifest_bytes) = iter.next().expect("layout checked");
    let (_, signature_bytes) = iter.next().expect("layout checked");
    let attestation = if has_attestation {
        let (_, attestation_bytes) = iter.next().expect("layout checked");
        Some(parse_doc::<SignedAttestation>(ENTRY_ATTESTATION, &attestation_bytes)?)
    } else {
        None
    };
    let (_, checksum_bytes) = iter.next().expect("layout checked");
    let (_, contents) = iter.next().expect("layout checked");

    let manifest: ProvenanceManifest = parse_doc(ENTRY_MANIFEST, &manifest_bytes)?;
    manifest.validate().map_err(|e| ArchiveError::BadDocument {
        entry: ENTRY_MANIFEST.into(),
        reason: e.to_string(),
    })?;
    let publisher_sig: PublisherSignature = parse_doc(ENTRY_SIGNATURE, &signature_bytes)?;
    let checksum = parse_checksum_entry(&checksum_bytes)?;

    Ok(PackagedArtifact {
        manifest,
        publisher_sig,
        registry_attestation: attestation,
        checksum,
        contents,
    })
}

fn parse_doc<T: serde::de::DeserializeOwned>(entry: &str, bytes: &[u8]) -> Result<T, ArchiveError> {
    canonical::from_canonical_json(bytes).map_err(|e| ArchiveError::BadDocument {
        entry: entry.to_owned(),
        reason: e.to_string(),
    })
}

fn parse_checksum_entry(bytes: &[u8]) -> Result<Digest256, ArchiveError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ArchiveError::BadDocument {
        entry: ENTRY_CHECKSUM.into(),
        reason: "not UTF-8".into(),
    })?;
    let hex_part = text.strip_suffix('\n').unwrap_or(text);
    if hex_part.chars().any(|c| c.is_ascii_uppercase()) {
        return Err(ArchiveError::BadDocument {
            entry: ENTRY_CHECKSUM.into(),
            reason: "hex must be lowercase".into(),
        });
    }
    Digest256::parse_hex(hex_part).map_err(|e| ArchiveError::BadDocument {
        entry: ENTRY_CHECKSUM.into(),
        reason: e.to_string(),
    })
}

/// Insert `registry_attestation.json` at its fixed position, leaving every
/// other entry byte-for-byte unchanged.
pub fn inject_attestation(
    artifact: &[u8],
    attestation: &SignedAttestation,
) -> Result<Vec<u8>, ArchiveError> {
    let entries = ustar::read_archive(artifact)?;
    let names: Vec<&str> = entries.iter().map(|(n, _)| n.as_str()).collect();
    if names.contains(&ENTRY_ATTESTATION) {
        return Err(ArchiveError::DuplicateAttestation);
    }
    if names != [ENTRY_MANIFEST, ENTRY_SIGNATURE, ENTRY_CHECKSUM, ENTRY_CONTENTS] {
        return Err(ArchiveError::MalformedEnvelope(format!(
            "expected an unpublished envelope, found entries {names:?}"
        )));
    }
    let attestation_bytes =
        canonical::canonical_json(attestation).map_err(|e| ArchiveError::BadDocument {
            entry: ENTRY_ATTESTATION.into(),
            reason: e.to_string(),
        })?;
    let rebuilt: Vec<(&str, &[u8])> = vec![
        (ENTRY_MANIFEST, entries[0].1.as_slice()),
        (ENTRY_SIGNATURE, entries[1].1.as_slice()),
        (ENTRY_ATTESTATION, attestation_bytes.as_slice()),
        (ENTRY_CHECKSUM, entries[2].1.as_slice()),
        (ENTRY_CONTENTS, entries[3].1.as_slice()),
    ];
    Ok(ustar::write_archive(&rebuilt)?)
}

/// Raw `(name, bytes)` entries of the outer envelope, for callers that need
/// byte-level access (tamper harnesses, registries re-serving artifacts).
pub fn raw_entries(artifact: &[u8]) -> Result<Vec<(String, Vec<u8>)>, ArchiveError> {
    Ok(ustar::read_archive(artifact)?)
}

/// Rebuild an outer envelope from raw entries, preserving the given order.
pub fn from_raw_entries(entries: &[(String, Vec<u8>)]) -> Result<Vec<u8>, ArchiveError> {
    let borrowed: Vec<(&str, &[u8])> = entries
        .iter()
        .map(|(n, b)| (n.as_str(), b.as_slice()))
        .collect();
    Ok(ustar::write_archive(&borrowed)?)
}

fn gzip_deterministic(data: &[u8]) -> Vec<u8> {
    let mut encoder = GzEncoder::new(Vec::new(), Compression::new(6));
    encoder.write_all(data).expect("in-memory write");
    let mut out = encoder.finish().expect("in-memory finish");
    // Normalize the header: MTIME = 0, OS byte = 255 (unknown). Neither field
    // is covered by the trailing CRC.
    out[4..8].fill(0);
    out[9] = 255;
    out
}

fn gunzip(data: &[u8]) -> Result<Vec<u8>, ArchiveError> {
    DECOMPRESSIONS.with(|c| c.set(c.get() + 1));
    let mut decoder = GzDecoder::new(data);
    let mut out = Vec::new();
    decoder
        .read_to_end(&mut out)
        .map_err(|e| ArchiveError::GzipCorrupt(e.to_string()))?;
    Ok(out)
}

fn validate_extraction_path(path: &str) -> Result<(), ArchiveError> {
    if path.is_empty() || path.starts_with('/') || path.contains('\\') {
        return Err(ArchiveError::PathEscape(path.to_owned()));
    }
    for segment in path.split('/') {
        if segment.is_empty() || segment == "." || segment == ".." {
            return Err(ArchiveError::PathEscape(path.to_owned()));
        }
    }
    Ok(())
}
