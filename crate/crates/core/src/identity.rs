//! Ed25519 key material, fingerprints, and publisher identities.
//!
//! Fingerprints are SHA-256 over the raw 32-byte public key and render as
//! `sha256:<hex>`. Public keys travel inside documents as
//! `ed25519:<base64>`; signatures as plain base64. Private key seeds are
//! written only to key files (mode 0600), never into artifact documents.

use std::fmt;
use std::path::Path;

use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;

use crate::canonical::{self, Digest256};

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SEED_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("seed must be exactly {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("public key must be exactly {PUBLIC_KEY_LEN} bytes, got {0}")]
    BadKeyLength(usize),
    #[error("malformed public key encoding: {0}")]
    BadKeyEncoding(String),
    #[error("malformed signature encoding: {0}")]
    BadSignatureEncoding(String),
    #[error("key file {path}: {reason}")]
    KeyFile { path: String, reason: String },
    #[error("key file failed its self-check signature")]
    SelfCheckFailed,
    #[error("random source unavailable: {0}")]
    Rng(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// An Ed25519 keypair. The public half is derivable from the 32-byte seed.
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    /// Generate from the operating system's entropy source.
    pub fn generate() -> Result<Self, KeyError> {
        let mut seed = [0u8; SEED_LEN];
        getrandom::fill(&mut seed).map_err(|e| KeyError::Rng(e.to_string()))?;
        Ok(Self::from_seed(seed))
    }

    /// Deterministic construction from a seed (used heavily in tests).
    pub fn from_seed(seed: [u8; SEED_LEN]) -> Self {
        KeyPair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn from_seed_slice(seed: &[u8]) -> Result<Self, KeyError> {
        let arr: [u8; SEED_LEN] = seed
            .try_into()
            .map_err(|_| KeyError::BadSeedLength(seed.len()))?;
        Ok(Self::from_seed(arr))
    }

    pub fn public_key(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn seed(&self) -> [u8; SEED_LEN] {
        self.signing.to_bytes()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of_public_key(&self.public_key())
    }

    /// Sign a message. Ed25519 is deterministic: the same key and message
    /// always produce the same signature bytes.
    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        SignatureBytes(self.signing.sign(message).to_bytes())
    }

    /// Write the key file: `{"public_key":"ed25519:<b64>","private_seed":"<b64>"}`,
    /// canonical JSON, mode 0600 on Unix.
    pub fn save(&self, path: &Path) -> Result<(), KeyError> {
        let doc = KeyFile {
            public_key: encode_public_key(&self.public_key()),
            private_seed: BASE64.encode(self.seed()),
        };
        let bytes = canonical::canonical_json(&doc).expect("key file serializes");
        std::fs::write(path, bytes)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt as _;
            std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600))?;
        }
        Ok(())
    }

    /// Load a key file, checking that the stored public key matches the seed
    /// and that a probe signature verifies.
    pub fn load(path: &Path) -> Result<Self, KeyError> {
        let bytes = std::fs::read(path)?;
        let doc: KeyFile =
            canonical::from_canonical_json(&bytes).map_err(|e| KeyError::KeyFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        let seed = BASE64
            .decode(doc.private_seed.as_bytes())
            .map_err(|e| KeyError::KeyFile {
                path: path.display().to_string(),
                reason: format!("bad seed base64: {e}"),
            })?;
        let pair = Self::from_seed_slice(&seed)?;
        let stored_pub = decode_public_key(&doc.public_key)?;
        if stored_pub != pair.public_key() {
            return Err(KeyError::KeyFile {
                path: path.display().to_string(),
                reason: "public key does not match private seed".to_owned(),
            });
        }
        let probe = b"provenant key self-check";
        if !verify(&pair.public_key(), probe, pair.sign(probe).as_bytes()) {
            return Err(KeyError::SelfCheckFailed);
        }
        Ok(pair)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Never print the seed.
        write!(f, "KeyPair({})", self.fingerprint())
    }
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    public_key: String,
    private_seed: String,
}

/// Render a public key as `ed25519:<base64>`.
pub fn encode_public_key(public_key: &[u8; PUBLIC_KEY_LEN]) -> String {
    format!("ed25519:{}", BASE64.encode(public_key))
}

/// Parse an `ed25519:<base64>` public key rendering.
pub fn decode_public_key(s: &str) -> Result<[u8; PUBLIC_KEY_LEN], KeyError> {
    let b64 = s
        .strip_prefix("ed25519:")
        .ok_or_else(|| KeyError::BadKeyEncoding(format!("missing ed25519: prefix in {s:?}")))?;
    let bytes = BASE64
        .decode(b64.as_bytes())
        .map_err(|e| KeyError::BadKeyEncoding(e.to_string()))?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| KeyError::BadKeyLength(bytes.len()))
}

/// Verify an Ed25519 signature. Total: malformed keys or signatures of any
/// length return `false` rather than erroring.
pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    let Ok(key_bytes) = <&[u8; PUBLIC_KEY_LEN]>::try_from(public_key) else {
        return false;
    };
    let Ok(key) = VerifyingKey::from_bytes(key_bytes) else {
        return false;
    };
    let Ok(sig_bytes) = <&[u8; SIGNATURE_LEN]>::try_from(signature) else {
        return false;
    };
    key.verify(message, &Signature::from_bytes(sig_bytes)).is_ok()
}

/// A 64-byte Ed25519 signature, serialized as base64 text.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SignatureBytes([u8; SIGNATURE_LEN]);

impl SignatureBytes {
    pub fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> Self {
        SignatureBytes(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, KeyError> {
        bytes
            .try_into()
            .map(SignatureBytes)
            .map_err(|_| KeyError::BadSignatureEncoding(format!("{} bytes", bytes.len())))
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_base64(&self) -> String {
        BASE64.encode(self.0)
    }
}

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignatureBytes({})", self.to_base64())
    }
}

impl Serialize for SignatureBytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_base64())
    }
}

impl<'de> Deserialize<'de> for SignatureBytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bytes = BASE64
            .decode(s.as_bytes())
            .map_err(serde::de::Error::custom)?;
        SignatureBytes::from_slice(&bytes).map_err(serde::de::Error::custom)
    }
}

/// SHA-256 fingerprint of a raw 32-byte public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(Digest256);

impl Fingerprint {
    pub fn of_public_key(public_key: &[u8; PUBLIC_KEY_LEN]) -> Self {
        Fingerprint(canonical::sha256(public_key))
    }

    /// Length-checked variant for untrusted input.
    pub fn of_key_bytes(public_key: &[u8]) -> Result<Self, KeyError> {
        let arr: &[u8; PUBLIC_KEY_LEN] = public_key
            .try_into()
            .map_err(|_| KeyError::BadKeyLength(public_key.len()))?;
        Ok(Self::of_public_key(arr))
    }

    pub fn digest(&self) -> &Digest256 {
        &self.0
    }

    pub fn parse(s: &str) -> Result<Self, crate::canonical::DigestParseError> {
        Digest256::parse(s).map(Fingerprint)
    }
}

impl From<Digest256> for Fingerprint {
    fn from(d: Digest256) -> Self {
        Fingerprint(d)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.0)
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Digest256::deserialize(deserializer).map(Fingerprint)
    }
}

/// A publisher: an identifier plus the keypair that signs its manifests.
pub struct PublisherIdentity {
    pub publisher_id: String,
    pub key_pair: KeyPair,
}

impl PublisherIdentity {
    pub fn new(publisher_id: impl Into<String>, key_pair: KeyPair) -> Self {
        PublisherIdentity {
            publisher_id: publisher_id.into(),
            key_pair,
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.key_pair.fingerprint()
    }
}
