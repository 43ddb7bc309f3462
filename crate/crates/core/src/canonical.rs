//! Deterministic canonical JSON encoding and SHA-256 digests.
//!
//! Every signature and content hash in the artifact format is computed over
//! canonical bytes, so the encoding must be byte-stable across runs,
//! processes, and implementations:
//!
//! - object keys sorted by their UTF-8 byte sequence, no duplicate keys;
//! - no insignificant whitespace;
//! - integers only (64-bit signed, minimal decimal form) — no floats ever
//!   appear in a signed document;
//! - strings escaped minimally: `"` and `\`, the short forms `\b \t \n \f \r`,
//!   and lowercase `\u00xx` for remaining control characters; everything else
//!   is raw UTF-8;
//! - byte strings carried as standard base64 text, digests as
//!   `sha256:`-prefixed lowercase hex.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;

/// Errors from canonical encoding, decoding, and the serde bridge.
#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("duplicate map key: {0:?}")]
    DuplicateKey(String),
    #[error("number {0} is not representable as a 64-bit signed integer")]
    NonInteger(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A value that has exactly one byte representation under [`canonical_encode`].
///
/// Maps are backed by a `BTreeMap`, so key uniqueness and byte-order sorting
/// hold by construction; duplicate keys are rejected at the points where they
/// can enter ([`CanonicalValue::map_from_pairs`], [`CanonicalValue::from_json_bytes`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalValue {
    Null,
    Bool(bool),
    Int(i64),
    Text(String),
    /// Encoded as a base64 text value. Decoding cannot distinguish byte
    /// strings from text, so a round trip yields `Text(base64(..))` — the
    /// canonical bytes (and therefore every hash and signature) are
    /// unaffected.
    Bytes(Vec<u8>),
    Seq(Vec<CanonicalValue>),
    Map(BTreeMap<String, CanonicalValue>),
}

impl CanonicalValue {
    /// Build a map, rejecting duplicate keys.
    pub fn map_from_pairs<K, I>(pairs: I) -> Result<Self, CanonicalError>
    where
        K: Into<String>,
        I: IntoIterator<Item = (K, CanonicalValue)>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            let k = k.into();
            if map.contains_key(&k) {
                return Err(CanonicalError::DuplicateKey(k));
            }
            map.insert(k, v);
        }
        Ok(CanonicalValue::Map(map))
    }

    /// Decode canonical (or plain) JSON text into a value tree.
    ///
    /// Numbers outside the 64-bit signed integer range, and any float, are
    /// rejected: signed documents never contain them.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, CanonicalError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)?;
        Self::from_json_value(value)
    }

    /// Convert a `serde_json::Value`, enforcing the integer-only rule.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self, CanonicalError> {
        Ok(match value {
            serde_json::Value::Null => CanonicalValue::Null,
            serde_json::Value::Bool(b) => CanonicalValue::Bool(b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => CanonicalValue::Int(i),
                None => return Err(CanonicalError::NonInteger(n.to_string())),
            },
            serde_json::Value::String(s) => CanonicalValue::Text(s),
            serde_json::Value::Array(items) => CanonicalValue::Seq(
                items
                    .into_iter()
                    .map(Self::from_json_value)
                    .collect::<Result<_, _>>()?,
            ),
            serde_json::Value::Object(map) => {
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    out.insert(k, Self::from_json_value(v)?);
                }
                CanonicalValue::Map(out)
            }
        })
    }
}

impl From<bool> for CanonicalValue {
    fn from(v: bool) -> Self {
        CanonicalValue::Bool(v)
    }
}

impl From<i64> for CanonicalValue {
    fn from(v: i64) -> Self {
        CanonicalValue::Int(v)
    }
}

impl From<&str> for CanonicalValue {
    fn from(v: &str) -> Self {
        CanonicalValue::Text(v.to_owned())
    }
}

impl From<String> for CanonicalValue {
    fn from(v: String) -> Self {
        CanonicalValue::Text(v)
    }
}

impl Serialize for CanonicalValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CanonicalValue::Null => serializer.serialize_unit(),
            CanonicalValue::Bool(b) => serializer.serialize_bool(*b),
            CanonicalValue::Int(i) => serializer.serialize_i64(*i),
            CanonicalValue::Text(s) => serializer.serialize_str(s),
            CanonicalValue::Bytes(b) => serializer.serialize_str(&BASE64.encode(b)),
            CanonicalValue::Seq(items) => items.serialize(serializer),
            CanonicalValue::Map(map) => map.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for CanonicalValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        CanonicalValue::from_json_value(value).map_err(D::Error::custom)
    }
}

/// Encode a value into its unique canonical byte sequence.
///
/// Pure: equal values produce identical bytes regardless of construction
/// order. Key uniqueness is guaranteed by the map representation.
pub fn canonical_encode(value: &CanonicalValue) -> Vec<u8> {
    let mut out = Vec::with_capacity(128);
    encode_into(&mut out, value);
    out
}

fn encode_into(out: &mut Vec<u8>, value: &CanonicalValue) {
    match value {
        CanonicalValue::Null => out.extend_from_slice(b"null"),
        CanonicalValue::Bool(true) => out.extend_from_slice(b"true"),
        CanonicalValue::Bool(false) => out.extend_from_slice(b"false"),
        CanonicalValue::Int(i) => {
            let mut buf = itoa_buf();
            out.extend_from_slice(write_i64(&mut buf, *i));
        }
        CanonicalValue::Text(s) => encode_string(out, s),
        CanonicalValue::Bytes(b) => encode_string(out, &BASE64.encode(b)),
        CanonicalValue::Seq(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                encode_into(out, item);
            }
            out.push(b']');
        }
        CanonicalValue::Map(map) => {
            out.push(b'{');
            // BTreeMap<String, _> iterates in UTF-8 byte order.
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                encode_string(out, k);
                out.push(b':');
                encode_into(out, v);
            }
            out.push(b'}');
        }
    }
}

fn itoa_buf() -> [u8; 24] {
    [0u8; 24]
}

fn write_i64(buf: &mut [u8; 24], v: i64) -> &[u8] {
    use std::io::Write as _;
    let mut cursor = std::io::Cursor::new(&mut buf[..]);
    write!(cursor, "{v}").expect("i64 fits in 24 bytes");
    let len = cursor.position() as usize;
    &buf[..len]
}

fn encode_string(out: &mut Vec<u8>, s: &str) {
    out.push(b'"');
    let mut utf8 = [0u8; 4];
    for c in s.chars() {
        match c {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\u{0c}' => out.extend_from_slice(b"\\f"),
            '\r' => out.extend_from_slice(b"\\r"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => out.extend_from_slice(c.encode_utf8(&mut utf8).as_bytes()),
        }
    }
    out.push(b'"');
}

/// A SHA-256 digest, rendered as `sha256:` plus 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest256([u8; 32]);

/// Error parsing a digest rendering.
#[derive(Debug, Error)]
#[error("invalid digest {0:?}: expected sha256:<64 hex chars>")]
pub struct DigestParseError(String);

impl Digest256 {
    /// The all-zero digest, used as the genesis link in hash chains.
    pub const ZERO: Digest256 = Digest256([0u8; 32]);

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Digest256(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Lowercase hex without the `sha256:` prefix.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parse a `sha256:<hex>` rendering. Hex case is normalized to lowercase.
    pub fn parse(s: &str) -> Result<Self, DigestParseError> {
        let hex_part = s
            .strip_prefix("sha256:")
            .ok_or_else(|| DigestParseError(s.to_owned()))?;
        Self::parse_hex(hex_part).map_err(|_| DigestParseError(s.to_owned()))
    }

    /// Parse bare hex (64 chars, any case).
    pub fn parse_hex(hex_part: &str) -> Result<Self, DigestParseError> {
        if hex_part.len() != 64 {
            return Err(DigestParseError(hex_part.to_owned()));
        }
        let bytes = hex::decode(hex_part).map_err(|_| DigestParseError(hex_part.to_owned()))?;
        let mut out = [0u8; 32];
        out.copy_from_slice(&bytes);
        Ok(Digest256(out))
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sha256:{}", self.to_hex())
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256(sha256:{})", self.to_hex())
    }
}

impl FromStr for Digest256 {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Digest256 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Digest256 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest256::parse(&s).map_err(D::Error::custom)
    }
}

/// SHA-256 over raw bytes.
pub fn sha256(data: &[u8]) -> Digest256 {
    let digest = Sha256::digest(data);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    Digest256(out)
}

/// SHA-256 over the canonical encoding of a value.
pub fn hash_canonical(value: &CanonicalValue) -> Digest256 {
    sha256(&canonical_encode(value))
}

/// Canonical bytes of any serializable document.
///
/// The document is converted through `serde_json::Value`, so the integer-only
/// rule is enforced on the way in.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    Ok(canonical_encode(&to_canonical_value(value)?))
}

/// Convert a serializable document into a canonical value tree.
pub fn to_canonical_value<T: Serialize>(value: &T) -> Result<CanonicalValue, CanonicalError> {
    CanonicalValue::from_json_value(serde_json::to_value(value)?)
}

/// SHA-256 over the canonical bytes of a serializable document.
pub fn hash_canonical_json<T: Serialize>(value: &T) -> Result<Digest256, CanonicalError> {
    Ok(sha256(&canonical_json(value)?))
}

/// Parse a document from JSON text, rejecting floats anywhere in the tree.
pub fn from_canonical_json<T: serde::de::DeserializeOwned>(
    bytes: &[u8],
) -> Result<T, CanonicalError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    // Walk once for the float guard before handing to the typed deserializer.
    CanonicalValue::from_json_value(value.clone())?;
    Ok(T::deserialize(value)?)
}
