//! RFC 3339 timestamps kept in their original text form.
//!
//! Timestamps participate in canonical encodings, so normalizing them (for
//! example rewriting `+00:00` as `Z`) would silently change signed bytes.
//! The text is validated on construction and preserved verbatim after that.

use alloc::string::{String, ToString};
use core::fmt;

use chrono::{DateTime, FixedOffset};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A validated RFC 3339 timestamp. Ordering and arithmetic use the parsed
/// instant; serialization uses the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timestamp(String);

impl Timestamp {
    pub fn parse(text: &str) -> Result<Self, TimestampError> {
        DateTime::parse_from_rfc3339(text)
            .map_err(|e| TimestampError::Invalid(e.to_string()))?;
        Ok(Timestamp(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_datetime(&self) -> DateTime<FixedOffset> {
        // Infallible: validated at construction.
        DateTime::parse_from_rfc3339(&self.0).expect("validated timestamp")
    }

    /// Seconds from `self` to `later`; negative when `later` precedes `self`.
    pub fn seconds_until(&self, later: &Timestamp) -> i64 {
        (later.to_datetime() - self.to_datetime()).num_seconds()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimestampError {
    #[error("invalid RFC 3339 timestamp: {0}")]
    Invalid(String),
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
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
        Timestamp::parse(&s).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_and_preserves_text() {
        let t = Timestamp::parse("2025-06-01T12:00:00+00:00").unwrap();
        assert_eq!(t.as_str(), "2025-06-01T12:00:00+00:00");
        let z = Timestamp::parse("2025-06-01T12:00:00Z").unwrap();
        // Same instant, different text; both texts survive untouched.
        assert_eq!(t.to_datetime(), z.to_datetime());
        assert_ne!(t.as_str(), z.as_str());
    }

    #[test]
    fn rejects_non_rfc3339() {
        assert!(Timestamp::parse("June 1st 2025").is_err());
        assert!(Timestamp::parse("2025-06-01").is_err());
        assert!(Timestamp::parse("").is_err());
    }

    #[test]
    fn age_arithmetic() {
        let a = Timestamp::parse("2025-06-01T00:00:00Z").unwrap();
        let b = Timestamp::parse("2025-06-01T00:10:00Z").unwrap();
        assert_eq!(a.seconds_until(&b), 600);
        assert_eq!(b.seconds_until(&a), -600);
    }
}
