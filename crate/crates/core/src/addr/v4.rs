use std::fmt;
use std::str::FromStr;

use super::{AddrError, Malformed};

/// A 32-bit IPv4 address. The integer value has the first dotted octet in
/// its most significant byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct V4Address(u32);

impl V4Address {
    pub const UNSPECIFIED: V4Address = V4Address(0);
    pub const BROADCAST: V4Address = V4Address(u32::MAX);

    pub const fn new(value: u32) -> Self {
        V4Address(value)
    }

    pub const fn from_octets(o: [u8; 4]) -> Self {
        V4Address(u32::from_be_bytes(o))
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn octets(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }

    /// Classful class, decided by the leading bits of the first octet.
    pub fn class(self) -> AddressClass {
        match self.0.leading_ones() {
            0 => AddressClass::A,
            1 => AddressClass::B,
            2 => AddressClass::C,
            3 => AddressClass::D,
            _ => AddressClass::E,
        }
    }

    /// Reserved / public / private breakdown. Special ranges are checked
    /// before the class default, so the result is a total, disjoint
    /// classification of the 32-bit space.
    pub fn scope(self) -> V4Scope {
        let v = self.0;
        let in_block = |net: u32, len: u32| v & mask_bits(len) == net;
        if in_block(0x0000_0000, 8) {
            V4Scope::Reserved
        } else if in_block(0x7F00_0000, 8) {
            V4Scope::LocalLoopback
        } else if in_block(0x0A00_0000, 8) || in_block(0xAC10_0000, 12) || in_block(0xC0A8_0000, 16)
        {
            V4Scope::Private
        } else if in_block(0xE000_0000, 4) {
            V4Scope::Multicast
        } else if in_block(0xF000_0000, 4) {
            // includes 255.255.255.255
            V4Scope::Reserved
        } else {
            V4Scope::Public
        }
    }
}

impl From<[u8; 4]> for V4Address {
    fn from(o: [u8; 4]) -> Self {
        V4Address::from_octets(o)
    }
}

impl From<V4Address> for u32 {
    fn from(a: V4Address) -> u32 {
        a.0
    }
}

impl fmt::Display for V4Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.octets();
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for V4Address {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_v4(s)
    }
}

/// Parses dotted-decimal text. Each of the four components must be one to
/// three decimal digits with value at most 255; signs, blanks and empty
/// components are rejected.
pub fn parse_v4(text: &str) -> Result<V4Address, AddrError> {
    let mut octets = [0u8; 4];
    let mut count = 0;
    for (i, part) in text.split('.').enumerate() {
        if i >= 4 {
            return Err(AddrError::malformed(text, Malformed::V4ComponentCount));
        }
        if part.is_empty() || part.len() > 3 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(AddrError::malformed(text, Malformed::V4Component(i)));
        }
        let value: u16 = part.parse().expect("validated digits");
        octets[i] = u8::try_from(value)
            .map_err(|_| AddrError::malformed(text, Malformed::V4Component(i)))?;
        count += 1;
    }
    if count != 4 {
        return Err(AddrError::malformed(text, Malformed::V4ComponentCount));
    }
    Ok(V4Address::from_octets(octets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddressClass {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for AddressClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            AddressClass::A => "A",
            AddressClass::B => "B",
            AddressClass::C => "C",
            AddressClass::D => "D",
            AddressClass::E => "E",
        };
        f.write_str(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum V4Scope {
    Reserved,
    Public,
    Private,
    LocalLoopback,
    Multicast,
}

impl fmt::Display for V4Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            V4Scope::Reserved => "Reserved",
            V4Scope::Public => "Public",
            V4Scope::Private => "Private",
            V4Scope::LocalLoopback => "Local Loopback",
            V4Scope::Multicast => "Multicast",
        };
        f.write_str(s)
    }
}

const fn mask_bits(prefix_len: u32) -> u32 {
    if prefix_len == 0 {
        0
    } else {
        u32::MAX << (32 - prefix_len)
    }
}

/// A contiguous ("slash notation") network mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct V4Mask {
    prefix_len: u8,
}

impl V4Mask {
    pub fn new(prefix_len: u8) -> Result<Self, AddrError> {
        if prefix_len > 32 {
            return Err(AddrError::InvalidPrefix(prefix_len.into()));
        }
        Ok(V4Mask { prefix_len })
    }

    /// Accepts a dotted mask value such as 255.255.255.240; rejects
    /// non-contiguous masks.
    pub fn from_value(value: u32) -> Result<Self, AddrError> {
        let len = value.leading_ones();
        if mask_bits(len) != value {
            return Err(AddrError::malformed(
                &V4Address(value).to_string(),
                Malformed::BadPrefix,
            ));
        }
        Ok(V4Mask {
            prefix_len: len as u8,
        })
    }

    pub const fn prefix_len(self) -> u8 {
        self.prefix_len
    }

    pub const fn value(self) -> u32 {
        mask_bits(self.prefix_len as u32)
    }

    pub const fn host_bits(self) -> u32 {
        !self.value()
    }

    /// Number of addresses covered, network and broadcast included.
    pub const fn block_size(self) -> u64 {
        1u64 << (32 - self.prefix_len as u32)
    }
}

impl fmt::Display for V4Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", self.prefix_len)
    }
}

/// The "ANDing" of an address with its mask.
pub fn network_address(a: V4Address, m: V4Mask) -> V4Address {
    V4Address(a.0 & m.value())
}

pub fn broadcast_address(a: V4Address, m: V4Mask) -> V4Address {
    V4Address(a.0 | m.host_bits())
}

/// Usable host addresses under a prefix: 2^(32-len) - 2, and 0 for /31
/// and /32 where the formula would go negative or degenerate.
pub fn usable_hosts(prefix_len: u8) -> u64 {
    if prefix_len >= 31 {
        return 0;
    }
    (1u64 << (32 - prefix_len as u32)) - 2
}

/// The stride between consecutive equal-size subnets inside the octet
/// where the mask boundary falls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MagicNumber {
    pub prefix_len: u8,
    /// 0-based index of the partially masked octet.
    pub octet_index: usize,
    pub octet_mask: u8,
    pub magic: u16,
}

impl MagicNumber {
    /// Start values of each slice within the interesting octet.
    pub fn sequence(&self) -> Vec<u8> {
        (0u16..256)
            .step_by(self.magic as usize)
            .map(|v| v as u8)
            .collect()
    }
}

pub fn magic_number(prefix_len: u8) -> Result<MagicNumber, AddrError> {
    if prefix_len == 0 || prefix_len > 32 {
        return Err(AddrError::InvalidPrefix(prefix_len.into()));
    }
    let octet_index = (prefix_len as usize - 1) / 8;
    let bits_in_octet = prefix_len as u32 - 8 * octet_index as u32;
    let octet_mask = (0xFFu16 << (8 - bits_in_octet)) as u8;
    Ok(MagicNumber {
        prefix_len,
        octet_index,
        octet_mask,
        magic: 256 - octet_mask as u16,
    })
}

/// An address with a prefix length, e.g. `10.0.0.0/23`. The address is
/// kept as given; use [`V4Prefix::has_host_bits`] to detect a non-network
/// base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct V4Prefix {
    pub addr: V4Address,
    pub mask: V4Mask,
}

impl V4Prefix {
    pub fn new(addr: V4Address, prefix_len: u8) -> Result<Self, AddrError> {
        Ok(V4Prefix {
            addr,
            mask: V4Mask::new(prefix_len)?,
        })
    }

    pub fn prefix_len(&self) -> u8 {
        self.mask.prefix_len()
    }

    pub fn network(&self) -> V4Address {
        network_address(self.addr, self.mask)
    }

    pub fn broadcast(&self) -> V4Address {
        broadcast_address(self.addr, self.mask)
    }

    pub fn has_host_bits(&self) -> bool {
        self.addr.0 & self.mask.host_bits() != 0
    }

    pub fn contains(&self, a: V4Address) -> bool {
        network_address(a, self.mask) == self.network()
    }
}

impl fmt::Display for V4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.mask.prefix_len())
    }
}

impl FromStr for V4Prefix {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| AddrError::malformed(s, Malformed::BadPrefix))?;
        let addr = parse_v4(addr)?;
        if len.is_empty() || len.len() > 2 || !len.bytes().all(|b| b.is_ascii_digit()) {
            return Err(AddrError::malformed(s, Malformed::BadPrefix));
        }
        let len: u8 = len.parse().expect("validated digits");
        V4Prefix::new(addr, len)
    }
}
