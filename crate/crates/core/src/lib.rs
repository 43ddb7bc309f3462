//! Core library for the provenant artifact distribution system.
//!
//! An artifact travels as a two-layer archive: an uncompressed outer tar
//! carrying the provenance documents (manifest, publisher signature, registry
//! attestation, checksum) around a gzipped inner tar of source files. The
//! publisher signs the provenance manifest at packaging time; the registry
//! countersigns with an attestation at publication time; the consumer's
//! resolver enforces authoritative namespace bindings and pinned registry
//! fingerprints, then runs the six-level verification chain before anything
//! is installed.
//!
//! Module map:
//!
//! - [`canonical`]: deterministic byte encoding and SHA-256 digests — the
//!   substrate every signature and content hash is computed over.
//! - [`identity`]: Ed25519 key material, fingerprints, publisher identities.
//! - [`tofu`]: the pinned-fingerprint store (trust on first use).
//! - [`manifest`]: the provenance manifest, content hash, and lineage chain.
//! - [`ledger`]: the append-only hash-chained evolution ledger.
//! - [`ustar`]: minimal deterministic tar read/write used by both layers.
//! - [`archive`]: pack / read-envelope / extract / inject-attestation.
//! - [`attestation`]: publisher signing, registry identity and rotation, and
//!   the countersigning publish pipeline.
//! - [`resolver`]: consumer configuration, namespace binding, and
//!   resolution with enforcement.
//! - [`verifier`]: the six-level verification chain and report.
//! - [`fixtures`]: deterministic sample projects used by benches and tests.

pub mod archive;
pub mod attestation;
pub mod canonical;
pub mod fixtures;
pub mod identity;
pub mod ledger;
pub mod manifest;
pub mod resolver;
pub mod timestamp;
pub mod tofu;
pub mod ustar;
pub mod verifier;

pub use canonical::{CanonicalValue, Digest256};
pub use identity::{Fingerprint, KeyPair, PublisherIdentity};
pub use manifest::ProvenanceManifest;
pub use timestamp::Timestamp;
