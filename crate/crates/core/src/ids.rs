//! Identifier newtypes.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Opaque device identifier, unique within a home.
    DeviceId
);
string_id!(
    /// Cleartext home identifier. Never leaves the home domain.
    HomeId
);
string_id!(
    /// Opaque pseudonym standing in for a subject outside the home domain.
    Pseudonym
);
string_id!(RoomId);
string_id!(
    /// Cleartext subject identifier. Never leaves the home domain.
    SubjectId
);

/// True when `s` can be embedded in a tab-separated event line.
pub(crate) fn is_line_safe(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control())
}
