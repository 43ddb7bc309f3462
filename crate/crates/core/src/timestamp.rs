//! RFC 3339 timestamps that round-trip byte-exactly.
//!
//! Timestamps live inside signed documents, so re-serializing a parsed
//! document must reproduce the original bytes. The type therefore keeps the
//! validated source text and only parses to an instant for comparisons.

use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("invalid RFC 3339 timestamp {0:?}")]
pub struct TimestampError(String);

/// An RFC 3339 UTC timestamp, stored as its original text.
///
/// Equality is textual (two renderings of the same instant differ); ordering
/// comparisons go through [`Timestamp::instant`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Timestamp(String);

impl Timestamp {
    /// Current time, rendered with second precision and a `Z` suffix.
    pub fn now() -> Self {
        Timestamp::from_datetime(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn parse(s: &str) -> Result<Self, TimestampError> {
        DateTime::parse_from_rfc3339(s)
            .map_err(|_| TimestampError(s.to_owned()))
            .map(|_| Timestamp(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The instant this timestamp denotes.
    pub fn instant(&self) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(&self.0)
            .expect("validated at construction")
            .with_timezone(&Utc)
    }

    /// True when `self` denotes an instant at or after `other`, allowing
    /// `skew_seconds` of tolerance.
    pub fn is_at_or_after(&self, other: &Timestamp, skew_seconds: i64) -> bool {
        self.instant() + chrono::Duration::seconds(skew_seconds) >= other.instant()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}
