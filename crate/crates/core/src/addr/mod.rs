//! IPv4 and IPv6 address handling: parsing, canonical text, classful and
//! scope classification, masks and the host arithmetic used by the planner.

mod v4;
mod v6;

pub use v4::{
    broadcast_address, magic_number, network_address, parse_v4, usable_hosts, AddressClass,
    MagicNumber, V4Address, V4Mask, V4Prefix, V4Scope,
};
pub use v6::{parse_v6, V6Address, V6Kind};

use std::fmt;

use thiserror::Error;

/// What exactly was wrong with an address literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Malformed {
    /// Dotted-quad component (0-based) that failed to parse.
    V4Component(usize),
    /// Wrong number of dotted-quad components.
    V4ComponentCount,
    /// More than one `::` in an IPv6 literal.
    DoubleCompression,
    /// Too many or too few 16-bit groups.
    GroupCount,
    /// A group that is empty, too long, or not hexadecimal.
    BadHex,
    /// A trailing dotted-quad that is not a valid IPv4 address.
    BadEmbeddedV4,
    /// `%` present with nothing after it.
    EmptyZone,
    /// Missing or invalid `/len` suffix.
    BadPrefix,
}

impl fmt::Display for Malformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Malformed::V4Component(i) => write!(f, "bad octet at component {i}"),
            Malformed::V4ComponentCount => f.write_str("expected four dotted components"),
            Malformed::DoubleCompression => f.write_str("'::' may appear only once"),
            Malformed::GroupCount => f.write_str("wrong number of 16-bit groups"),
            Malformed::BadHex => f.write_str("invalid hexadecimal group"),
            Malformed::BadEmbeddedV4 => f.write_str("invalid embedded IPv4 address"),
            Malformed::EmptyZone => f.write_str("empty zone identifier"),
            Malformed::BadPrefix => f.write_str("invalid prefix length"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddrError {
    #[error("malformed address {text:?}: {kind}")]
    MalformedAddress { text: String, kind: Malformed },
    #[error("prefix length {0} out of range")]
    InvalidPrefix(u32),
}

impl AddrError {
    pub(crate) fn malformed(text: &str, kind: Malformed) -> Self {
        AddrError::MalformedAddress {
            text: text.to_owned(),
            kind,
        }
    }
}
