//! The provenance manifest: the machine-generated metadata document that both
//! signatures are rooted in.
//!
//! The manifest records artifact identity (name, version, package id,
//! namespace, content hash), a per-file checksum entry for every packaged
//! file, declared dependencies, lineage (parent version chain, fork origin,
//! evolution anchor), and build metadata. Its wire form is canonical JSON in
//! the `provenance.json` envelope entry.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{self, CanonicalValue, Digest256};
use crate::timestamp::Timestamp;

/// Name of the human-authored project manifest inside the inner archive.
pub const PROJECT_MANIFEST: &str = "manifest.toml";

/// Directories never packaged (VCS and build output).
const EXCLUDED_DIRS: &[&str] = &[".git", ".hg", ".svn", "target", "build", "node_modules"];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("duplicate source path {0:?}")]
    DuplicatePath(String),
    #[error("invalid namespace {0:?}: must start with '@' and contain no '/'")]
    InvalidNamespace(String),
    #[error("invalid version {0:?}: {1}")]
    InvalidVersion(String, String),
    #[error("project manifest missing: no {PROJECT_MANIFEST} in {0}")]
    MissingProjectManifest(String),
    #[error("project manifest invalid: {0}")]
    InvalidProjectManifest(String),
    #[error("project has no source files")]
    EmptyProject,
    #[error("path {0:?} escapes or is unsafe: {1}")]
    UnsafePath(String, String),
    #[error("symlink {0:?} is not allowed in a package")]
    Symlink(String),
    #[error("lineage invalid: {0}")]
    InvalidLineage(String),
    #[error("manifest field invalid: {0}")]
    InvalidField(String),
    #[error("encoding error: {0}")]
    Canonical(#[from] canonical::CanonicalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A packaged file: a normalized relative path and its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        SourceFile {
            path: path.into(),
            bytes: bytes.into(),
        }
    }
}

/// Per-file metadata: description, opaque IO schemas, and the checksum that
/// verification level 1 checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleMeta {
    pub name: String,
    pub qualified_name: String,
    pub description: String,
    pub input_schema: CanonicalValue,
    pub output_schema: CanonicalValue,
    pub file_path: String,
    pub file_checksum: Digest256,
}

/// Where an artifact came from: version chain, fork origin, and the optional
/// anchor into an evolution ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lineage {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_content_hash: Option<Digest256>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fork_origin: Option<ForkOrigin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution_anchor: Option<EvolutionAnchor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkOrigin {
    pub name: String,
    pub namespace: String,
    pub version: String,
    pub content_hash: Digest256,
}

/// Reference into an append-only evolution ledger (verification level 6).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionAnchor {
    pub ledger_id: String,
    pub event_hash: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependency {
    pub name: String,
    pub namespace: String,
    pub version_constraint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildMeta {
    pub timestamp: Timestamp,
    pub runtime_version: String,
}

/// The provenance manifest `provenance.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceManifest {
    pub name: String,
    pub version: String,
    pub pkg_id: String,
    pub namespace: String,
    pub content_hash: Digest256,
    pub modules: Vec<ModuleMeta>,
    pub dependencies: Vec<Dependency>,
    pub lineage: Lineage,
    pub build: BuildMeta,
}

impl ProvenanceManifest {
    /// Canonical bytes: the exact message the publisher signs.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, ManifestError> {
        Ok(canonical::canonical_json(self)?)
    }

    /// SHA-256 over the canonical bytes: the value embedded in attestations.
    pub fn hash(&self) -> Result<Digest256, ManifestError> {
        Ok(canonical::hash_canonical_json(self)?)
    }

    /// Structural invariants that hold for every well-formed manifest.
    pub fn validate(&self) -> Result<(), ManifestError> {
        validate_namespace(&self.namespace)?;
        validate_version(&self.version)?;
        if self.name.is_empty() || self.name.contains('/') {
            return Err(ManifestError::InvalidField(format!(
                "name {:?} must be non-empty and contain no '/'",
                self.name
            )));
        }
        if self.pkg_id.is_empty() {
            return Err(ManifestError::InvalidField("pkg_id is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for module in &self.modules {
            validate_relative_path(&module.file_path)?;
            if !seen.insert(module.file_path.as_str()) {
                return Err(ManifestError::DuplicatePath(module.file_path.clone()));
            }
        }
        match (&self.lineage.parent_version, &self.lineage.parent_content_hash) {
            (Some(_), Some(_)) | (None, None) => {}
            _ => {
                return Err(ManifestError::InvalidLineage(
                    "parent_version and parent_content_hash must be both present or both absent"
                        .into(),
                ))
            }
        }
        Ok(())
    }

    /// Checksum map keyed by file path.
    pub fn checksums(&self) -> BTreeMap<&str, Digest256> {
        self.modules
            .iter()
            .map(|m| (m.file_path.as_str(), m.file_checksum))
            .collect()
    }
}

pub fn validate_namespace(namespace: &str) -> Result<(), ManifestError> {
    if !namespace.starts_with('@') || namespace.len() < 2 || namespace[1..].contains('/') {
        return Err(ManifestError::InvalidNamespace(namespace.to_owned()));
    }
    Ok(())
}

pub fn validate_version(version: &str) -> Result<(), ManifestError> {
    semver::Version::parse(version)
        .map(|_| ())
        .map_err(|e| ManifestError::InvalidVersion(version.to_owned(), e.to_string()))
}

fn validate_relative_path(path: &str) -> Result<(), ManifestError> {
    if path.is_empty() || path.starts_with('/') {
        return Err(ManifestError::UnsafePath(path.into(), "must be relative".into()));
    }
    if path.contains('\\') {
        return Err(ManifestError::UnsafePath(path.into(), "backslash".into()));
    }
    for segment in path.split('/') {
        if segment.is_empty() || segment == "." || segment == ".." {
            return Err(ManifestError::UnsafePath(
                path.into(),
                format!("segment {segment:?}"),
            ));
        }
    }
    Ok(())
}

/// Content hash: SHA-256 over the canonical encoding of the artifact identity
/// and its sorted per-file digests.
///
/// The hashed document is
/// `{"name":..,"pkg_id":..,"sources":[{"path":..,"sha256":..} sorted by path],"version":..}`,
/// so the result is independent of the order sources are presented in.
pub fn compute_content_hash<'a, I>(
    name: &str,
    version: &str,
    pkg_id: &str,
    sources: I,
) -> Result<Digest256, ManifestError>
where
    I: IntoIterator<Item = (&'a str, &'a [u8])>,
{
    let mut digests: BTreeMap<&str, Digest256> = BTreeMap::new();
    for (path, bytes) in sources {
        if digests.insert(path, canonical::sha256(bytes)).is_some() {
            return Err(ManifestError::DuplicatePath(path.to_owned()));
        }
    }
    let source_entries: Vec<CanonicalValue> = digests
        .iter()
        .map(|(path, digest)| {
            CanonicalValue::map_from_pairs([
                ("path", CanonicalValue::from(*path)),
                ("sha256", CanonicalValue::from(digest.to_string())),
            ])
            .expect("distinct literal keys")
        })
        .collect();
    let doc = CanonicalValue::map_from_pairs([
        ("name", CanonicalValue::from(name)),
        ("pkg_id", CanonicalValue::from(pkg_id)),
        ("sources", CanonicalValue::Seq(source_entries)),
        ("version", CanonicalValue::from(version)),
    ])
    .expect("distinct literal keys");
    Ok(canonical::hash_canonical(&doc))
}

/// Parsed `manifest.toml`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectManifest {
    pub package: ProjectPackage,
    #[serde(default)]
    pub dependencies: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectPackage {
    pub name: String,
    pub version: String,
    pub namespace: String,
    pub pkg_id: Option<String>,
    pub runtime_version: Option<String>,
}

impl ProjectManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let parsed: ProjectManifest =
            toml::from_str(text).map_err(|e| ManifestError::InvalidProjectManifest(e.to_string()))?;
        validate_namespace(&parsed.package.namespace)?;
        validate_version(&parsed.package.version)?;
        Ok(parsed)
    }

    /// Stable default package id derived from the namespace and name.
    pub fn pkg_id(&self) -> String {
        match &self.package.pkg_id {
            Some(id) => id.clone(),
            None => {
                let digest =
                    canonical::sha256(format!("{}/{}", self.package.namespace, self.package.name).as_bytes());
                format!("pkg_{}", &digest.to_hex()[..16])
            }
        }
    }

    /// Dependencies declared as `"@ns/name" = "constraint"` entries.
    pub fn dependency_list(&self) -> Result<Vec<Dependency>, ManifestError> {
        let mut out = Vec::new();
        for (key, constraint) in &self.dependencies {
            let (namespace, name) = key.split_once('/').ok_or_else(|| {
                ManifestError::InvalidProjectManifest(format!(
                    "dependency key {key:?} must look like \"@namespace/name\""
                ))
            })?;
            validate_namespace(namespace)?;
            out.push(Dependency {
                name: name.to_owned(),
                namespace: namespace.to_owned(),
                version_constraint: constraint.clone(),
            });
        }
        Ok(out)
    }
}

/// Options for [`build_manifest`].
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub lineage: Lineage,
    pub timestamp: Timestamp,
    /// Overrides the project manifest's `runtime_version` when set.
    pub runtime_version: Option<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            lineage: Lineage::default(),
            timestamp: Timestamp::now(),
            runtime_version: None,
        }
    }
}

/// Walk a project directory, compute per-file checksums and the content hash,
/// and assemble the provenance manifest.
///
/// Every packaged file (the project manifest included) gets exactly one
/// module entry. Symlinks and paths that cannot be represented are rejected.
pub fn build_manifest(
    project_dir: &Path,
    options: BuildOptions,
) -> Result<(ProvenanceManifest, Vec<SourceFile>), ManifestError> {
    let sources = collect_sources(project_dir)?;
    let project_text = sources
        .iter()
        .find(|f| f.path == PROJECT_MANIFEST)
        .ok_or_else(|| ManifestError::MissingProjectManifest(project_dir.display().to_string()))?;
    let project = ProjectManifest::parse(&String::from_utf8_lossy(&project_text.bytes))?;

    let content_hash = compute_content_hash(
        &project.package.name,
        &project.package.version,
        &project.pkg_id(),
        sources.iter().map(|f| (f.path.as_str(), f.bytes.as_slice())),
    )?;

    let modules = sources
        .iter()
        .map(|f| {
            let stem = f
                .path
                .rsplit('/')
                .next()
                .unwrap_or(&f.path)
                .split('.')
                .next()
                .unwrap_or(&f.path)
                .to_owned();
            ModuleMeta {
                name: stem,
                qualified_name: format!(
                    "{}/{}:{}",
                    project.package.namespace, project.package.name, f.path
                ),
                description: String::new(),
                input_schema: CanonicalValue::Null,
                output_schema: CanonicalValue::Null,
                file_path: f.path.clone(),
                file_checksum: canonical::sha256(&f.bytes),
            }
        })
        .collect();

    let manifest = ProvenanceManifest {
        name: project.package.name.clone(),
        version: project.package.version.clone(),
        pkg_id: project.pkg_id(),
        namespace: project.package.namespace.clone(),
        content_hash,
        modules,
        dependencies: project.dependency_list()?,
        lineage: options.lineage,
        build: BuildMeta {
            timestamp: options.timestamp,
            runtime_version: options
                .runtime_version
                .or(project.package.runtime_version)
                .unwrap_or_else(|| "1.0".to_owned()),
        },
    };
    manifest.validate()?;
    Ok((manifest, sources))
}

/// Collect package files under a project root, sorted by path.
pub fn collect_sources(project_dir: &Path) -> Result<Vec<SourceFile>, ManifestError> {
    let mut files = Vec::new();
    let walker = walkdir::WalkDir::new(project_dir)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|entry| {
            let name = entry.file_name().to_string_lossy();
            !(entry.depth() > 0 && entry.file_type().is_dir() && EXCLUDED_DIRS.contains(&name.as_ref()))
        });
    for entry in walker {
        let entry = entry.map_err(|e| {
            ManifestError::Io(std::io::Error::other(format!("walking project: {e}")))
        })?;
        if entry.path_is_symlink() {
            return Err(ManifestError::Symlink(entry.path().display().to_string()));
        }
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(project_dir)
            .map_err(|_| {
                ManifestError::UnsafePath(
                    entry.path().display().to_string(),
                    "outside project root".into(),
                )
            })?;
        let rel_str = rel
            .to_str()
            .ok_or_else(|| {
                ManifestError::UnsafePath(rel.to_string_lossy().into_owned(), "not UTF-8".into())
            })?
            .replace(std::path::MAIN_SEPARATOR, "/");
        validate_relative_path(&rel_str)?;
        if rel_str.len() > crate::ustar::NAME_MAX {
            return Err(ManifestError::UnsafePath(
                rel_str,
                format!("longer than {} bytes", crate::ustar::NAME_MAX),
            ));
        }
        files.push(SourceFile {
            path: rel_str,
            bytes: std::fs::read(entry.path())?,
        });
    }
    if files.is_empty() {
        return Err(ManifestError::EmptyProject);
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

/// Result of checking one parent→child lineage link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkStatus {
    Intact,
    /// The child declares no parent at all.
    NoParentDeclared,
    Broken { reason: String },
}

impl LinkStatus {
    pub fn is_intact(&self) -> bool {
        matches!(self, LinkStatus::Intact)
    }
}

/// Check that `child` correctly chains onto `parent`: the declared parent
/// content hash must equal the parent's actual content hash, and the declared
/// parent version must match.
pub fn verify_lineage_link(child: &ProvenanceManifest, parent: &ProvenanceManifest) -> LinkStatus {
    let (Some(parent_version), Some(parent_hash)) = (
        child.lineage.parent_version.as_ref(),
        child.lineage.parent_content_hash.as_ref(),
    ) else {
        return LinkStatus::NoParentDeclared;
    };
    if *parent_hash != parent.content_hash {
        return LinkStatus::Broken {
            reason: format!(
                "parent content hash mismatch: declared {parent_hash}, actual {}",
                parent.content_hash
            ),
        };
    }
    if *parent_version != parent.version {
        return LinkStatus::Broken {
            reason: format!(
                "parent version mismatch: declared {parent_version:?}, actual {:?}",
                parent.version
            ),
        };
    }
    LinkStatus::Intact
}

#[derive(Debug, Clone)]
pub struct ChainLink {
    /// Indices into the input sequence: link from `parent_index` to `child_index`.
    pub parent_index: usize,
    pub child_index: usize,
    pub status: LinkStatus,
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub links: Vec<ChainLink>,
    pub intact: bool,
}

/// Verify every adjacent link in an oldest-to-newest version chain. A single
/// version is vacuously intact.
pub fn verify_chain(versions: &[ProvenanceManifest]) -> ChainReport {
    let links: Vec<ChainLink> = versions
        .windows(2)
        .enumerate()
        .map(|(i, pair)| ChainLink {
            parent_index: i,
            child_index: i + 1,
            status: verify_lineage_link(&pair[1], &pair[0]),
        })
        .collect();
    let intact = links.iter().all(|l| l.status.is_intact());
    ChainReport { links, intact }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_project(dir: &Path, files: &[(&str, &str)]) {
        for (path, content) in files {
            let full = dir.join(path);
            std::fs::create_dir_all(full.parent().unwrap()).unwrap();
            std::fs::write(full, content).unwrap();
        }
    }

    const DEMO_TOML: &str = "[package]\nname = \"demo\"\nversion = \"1.0.0\"\nnamespace = \"@demo\"\npkg_id = \"pkg_TEST\"\nruntime_version = \"1.0\"\n";

    #[test]
    fn content_hash_matches_oracle_fixture() {
        // Frozen from tests/gen_vectors.py: demo/1.0.0/pkg_TEST with one file
        // src/a.txt = "hello\n".
        let digest = compute_content_hash(
            "demo",
            "1.0.0",
            "pkg_TEST",
            [("src/a.txt", b"hello\n".as_slice())],
        )
        .unwrap();
        assert_eq!(
            digest.to_string(),
            "sha256:84776d998e2d197c7e660d171bb6d9d70255e893e238cd4fa69272aca2d86ffe"
        );
    }

    #[test]
    fn content_hash_is_order_independent() {
        let a = [
            ("src/a.txt", b"one".as_slice()),
            ("src/b.txt", b"two".as_slice()),
        ];
        let b = [
            ("src/b.txt", b"two".as_slice()),
            ("src/a.txt", b"one".as_slice()),
        ];
        assert_eq!(
            compute_content_hash("n", "1.0.0", "p", a).unwrap(),
            compute_content_hash("n", "1.0.0", "p", b).unwrap()
        );
    }

    #[test]
    fn content_hash_changes_with_any_byte() {
        let base = compute_content_hash("n", "1.0.0", "p", [("f", b"abc".as_slice())]).unwrap();
        let changed = compute_content_hash("n", "1.0.0", "p", [("f", b"abd".as_slice())]).unwrap();
        assert_ne!(base, changed);
    }

    #[test]
    fn duplicate_paths_rejected() {
        let err = compute_content_hash(
            "n",
            "1.0.0",
            "p",
            [("f", b"a".as_slice()), ("f", b"b".as_slice())],
        )
        .unwrap_err();
        assert!(matches!(err, ManifestError::DuplicatePath(_)));
    }

    #[test]
    fn build_manifest_minimal_project() {
        let dir = tempfile::tempdir().unwrap();
        write_project(dir.path(), &[("manifest.toml", DEMO_TOML)]);
        let (manifest, sources) = build_manifest(
            dir.path(),
            BuildOptions {
                timestamp: Timestamp::parse("2026-02-01T09:00:00Z").unwrap(),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sources.len(), 1);
        assert_eq!(manifest.modules.len(), 1);
        assert_eq!(manifest.namespace, "@demo");
        assert_eq!(manifest.pkg_id, "pkg_TEST");
        manifest.validate().unwrap();
    }

    #[test]
    fn build_manifest_four_file_project_matches_recomputed_hash() {
        let dir = tempfile::tempdir().unwrap();
        write_project(
            dir.path(),
            &[
                ("manifest.toml", DEMO_TOML),
                ("src/a.src", "alpha"),
                ("src/b.src", "beta"),
                ("README.md", "readme"),
            ],
        );
        let (manifest, sources) = build_manifest(dir.path(), BuildOptions::default()).unwrap();
        assert_eq!(manifest.modules.len(), 4);
        // Independent recomputation over the same files.
        let expected = compute_content_hash(
            "demo",
            "1.0.0",
            "pkg_TEST",
            sources.iter().map(|f| (f.path.as_str(), f.bytes.as_slice())),
        )
        .unwrap();
        assert_eq!(manifest.content_hash, expected);
        // Every source appears exactly once in the module list.
        let paths: BTreeSet<_> = manifest.modules.iter().map(|m| m.file_path.as_str()).collect();
        assert_eq!(paths.len(), 4);
    }

    #[cfg(unix)]
    #[test]
    fn symlink_outside_root_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let outside = tempfile::tempdir().unwrap();
        std::fs::write(outside.path().join("secret"), "s").unwrap();
        write_project(dir.path(), &[("manifest.toml", DEMO_TOML)]);
        std::os::unix::fs::symlink(outside.path().join("secret"), dir.path().join("link")).unwrap();
        assert!(matches!(
            build_manifest(dir.path(), BuildOptions::default()),
            Err(ManifestError::Symlink(_))
        ));
    }

    #[test]
    fn missing_project_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_project(dir.path(), &[("src/a.src", "x")]);
        assert!(matches!(
            build_manifest(dir.path(), BuildOptions::default()),
            Err(ManifestError::MissingProjectManifest(_))
        ));
    }

    #[test]
    fn vcs_directories_are_excluded() {
        let dir = tempfile::tempdir().unwrap();
        write_project(
            dir.path(),
            &[
                ("manifest.toml", DEMO_TOML),
                (".git/HEAD", "ref: refs/heads/main"),
                ("target/out.bin", "binary"),
                ("src/a.src", "x"),
            ],
        );
        let (_, sources) = build_manifest(dir.path(), BuildOptions::default()).unwrap();
        let paths: Vec<_> = sources.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, vec!["manifest.toml", "src/a.src"]);
    }

    fn chain_manifest(version: &str, body: &[u8], parent: Option<&ProvenanceManifest>) -> ProvenanceManifest {
        let sources = [("src/main.src", body)];
        let content_hash = compute_content_hash("pkg", version, "pkg_chain", sources).unwrap();
        ProvenanceManifest {
            name: "pkg".into(),
            version: version.into(),
            pkg_id: "pkg_chain".into(),
            namespace: "@chain".into(),
            content_hash,
            modules: vec![],
            dependencies: vec![],
            lineage: Lineage {
                parent_version: parent.map(|p| p.version.clone()),
                parent_content_hash: parent.map(|p| p.content_hash),
                fork_origin: None,
                evolution_anchor: None,
            },
            build: BuildMeta {
                timestamp: Timestamp::parse("2026-02-01T09:00:00Z").unwrap(),
                runtime_version: "1.0".into(),
            },
        }
    }

    fn five_chain() -> Vec<ProvenanceManifest> {
        let mut chain: Vec<ProvenanceManifest> = Vec::new();
        for i in 0..5 {
            let parent = chain.last();
            let m = chain_manifest(&format!("1.{i}.0"), format!("body {i}").as_bytes(), parent);
            chain.push(m);
        }
        chain
    }

    #[test]
    fn untampered_chain_verifies() {
        let chain = five_chain();
        let report = verify_chain(&chain);
        assert!(report.intact);
        assert_eq!(report.links.len(), 4);
    }

    #[test]
    fn single_version_chain_is_vacuously_intact() {
        let chain = vec![chain_manifest("1.0.0", b"only", None)];
        assert!(verify_chain(&chain).intact);
    }

    #[test]
    fn tampering_any_version_breaks_exactly_its_outgoing_link() {
        // Exhaustive mutation loop: recompute version j's content hash from
        // tampered sources and confirm only link (j, j+1) breaks.
        let chain = five_chain();
        for j in 0..4 {
            let mut tampered = chain.clone();
            tampered[j].content_hash = compute_content_hash(
                "pkg",
                &tampered[j].version,
                "pkg_chain",
                [("src/main.src", b"tampered".as_slice())],
            )
            .unwrap();
            let report = verify_chain(&tampered);
            assert!(!report.intact);
            for link in &report.links {
                if link.parent_index == j {
                    assert!(!link.status.is_intact(), "link ({j},{}) should break", j + 1);
                } else {
                    assert!(link.status.is_intact(), "link ({},{}) should hold", link.parent_index, link.child_index);
                }
            }
        }
    }

    #[test]
    fn absent_lineage_is_reported_distinctly() {
        let chain = five_chain();
        let orphan = chain_manifest("2.0.0", b"orphan", None);
        assert_eq!(
            verify_lineage_link(&orphan, &chain[0]),
            LinkStatus::NoParentDeclared
        );
    }

    #[test]
    fn manifest_canonical_bytes_match_oracle() {
        // Frozen from tests/gen_vectors.py for this exact manifest shape.
        let manifest = ProvenanceManifest {
            name: "demo".into(),
            version: "1.0.0".into(),
            pkg_id: "pkg_TEST".into(),
            namespace: "@demo".into(),
            content_hash: Digest256::parse(
                "sha256:84776d998e2d197c7e660d171bb6d9d70255e893e238cd4fa69272aca2d86ffe",
            )
            .unwrap(),
            modules: vec![ModuleMeta {
                name: "a".into(),
                qualified_name: "@demo/demo:src/a.txt".into(),
                description: String::new(),
                input_schema: CanonicalValue::Null,
                output_schema: CanonicalValue::Null,
                file_path: "src/a.txt".into(),
                file_checksum: Digest256::parse(
                    "sha256:5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03",
                )
                .unwrap(),
            }],
            dependencies: vec![],
            lineage: Lineage::default(),
            build: BuildMeta {
                timestamp: Timestamp::parse("2026-02-01T09:00:00Z").unwrap(),
                runtime_version: "1.0".into(),
            },
        };
        assert_eq!(
            manifest.hash().unwrap().to_string(),
            "sha256:6f2049a2a60a198b7e5aec8c3ea9fd3d8392b8cce36f957f3add83ccf37b3f9f"
        );
        // Parse → re-encode is byte-identical.
        let bytes = manifest.canonical_bytes().unwrap();
        let reparsed: ProvenanceManifest = canonical::from_canonical_json(&bytes).unwrap();
        assert_eq!(reparsed.canonical_bytes().unwrap(), bytes);
    }

    #[test]
    fn namespace_syntax_enforced() {
        assert!(validate_namespace("@acme").is_ok());
        assert!(validate_namespace("acme").is_err());
        assert!(validate_namespace("@").is_err());
        assert!(validate_namespace("@a/b").is_err());
    }
}
