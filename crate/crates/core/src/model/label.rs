use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Textual form of the out-of-gallery sentinel.
pub const UNKNOWN_LABEL: &str = "Unknown";

/// A person identity: either a member of the people-of-interest set or the
/// `Unknown` sentinel used for out-of-gallery people.
///
/// Labels order by their textual form, which gives every argmax in the crate
/// the same deterministic tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IdentityLabel {
    Known(String),
    Unknown,
}

impl IdentityLabel {
    /// Build a named identity. The name must be non-empty and must not be the
    /// sentinel text.
    pub fn known(name: impl Into<String>) -> Result<Self, Error> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidArgument("identity name is empty".into()));
        }
        if name == UNKNOWN_LABEL {
            return Err(Error::InvalidArgument(format!(
                "`{UNKNOWN_LABEL}` is reserved for the out-of-gallery sentinel"
            )));
        }
        Ok(IdentityLabel::Known(name))
    }

    pub fn as_str(&self) -> &str {
        match self {
            IdentityLabel::Known(name) => name,
            IdentityLabel::Unknown => UNKNOWN_LABEL,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, IdentityLabel::Unknown)
    }
}

impl FromStr for IdentityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == UNKNOWN_LABEL {
            Ok(IdentityLabel::Unknown)
        } else {
            IdentityLabel::known(s)
        }
    }
}

impl Ord for IdentityLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for IdentityLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IdentityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for IdentityLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IdentityLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
