use std::fmt;
use std::str::FromStr;

use super::{parse_v4, AddrError, Malformed};

/// A 128-bit IPv6 address with an optional scope zone (`fe80::1%eth0`).
/// Zones are opaque and compared byte-wise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct V6Address {
    value: u128,
    zone: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum V6Kind {
    Unspecified,
    Loopback,
    UniqueLocalUnicast,
    LinkLocalUnicast,
    Multicast,
    Documentation,
    GlobalUnicast,
}

impl fmt::Display for V6Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            V6Kind::Unspecified => "Unspecified",
            V6Kind::Loopback => "Loopback",
            V6Kind::UniqueLocalUnicast => "Unique local unicast",
            V6Kind::LinkLocalUnicast => "Link-local unicast",
            V6Kind::Multicast => "Multicast",
            V6Kind::Documentation => "Documentation",
            V6Kind::GlobalUnicast => "Global unicast",
        };
        f.write_str(s)
    }
}

fn in_prefix(v: u128, net: u128, len: u32) -> bool {
    let mask = if len == 0 {
        0
    } else {
        u128::MAX << (128 - len)
    };
    v & mask == net
}

impl V6Address {
    pub const fn new(value: u128) -> Self {
        V6Address { value, zone: None }
    }

    pub fn from_groups(groups: [u16; 8]) -> Self {
        let value = groups.iter().fold(0u128, |acc, &g| (acc << 16) | g as u128);
        V6Address::new(value)
    }

    /// Attaches a zone identifier. An empty zone is rejected.
    pub fn with_zone(self, zone: impl Into<String>) -> Result<Self, AddrError> {
        let zone = zone.into();
        if zone.is_empty() {
            return Err(AddrError::malformed(
                &self.to_string(),
                Malformed::EmptyZone,
            ));
        }
        Ok(V6Address {
            zone: Some(zone),
            ..self
        })
    }

    pub const fn value(&self) -> u128 {
        self.value
    }

    pub fn zone(&self) -> Option<&str> {
        self.zone.as_deref()
    }

    pub fn groups(&self) -> [u16; 8] {
        let mut g = [0u16; 8];
        for (i, slot) in g.iter_mut().enumerate() {
            *slot = (self.value >> (112 - 16 * i)) as u16;
        }
        g
    }

    pub fn kind(&self) -> V6Kind {
        let v = self.value;
        // The two /128s first, then the remaining (mutually disjoint) prefixes.
        if v == 0 {
            V6Kind::Unspecified
        } else if v == 1 {
            V6Kind::Loopback
        } else if in_prefix(v, 0x2001_0db8 << 96, 32) {
            V6Kind::Documentation
        } else if in_prefix(v, 0xfe80 << 112, 10) {
            V6Kind::LinkLocalUnicast
        } else if in_prefix(v, 0xff00 << 112, 8) {
            V6Kind::Multicast
        } else if in_prefix(v, 0xfc00 << 112, 7) {
            V6Kind::UniqueLocalUnicast
        } else {
            V6Kind::GlobalUnicast
        }
    }

    /// Text with the low 32 bits written as a dotted quad, e.g.
    /// `::ffff:129.144.52.38`. Only produced on request; [`fmt::Display`]
    /// always uses pure hex groups.
    pub fn to_embedded_v4_string(&self) -> String {
        let g = self.groups();
        let head = compress(&g[..6]);
        let low = super::V4Address::new(self.value as u32);
        let mut s = if head.ends_with(':') {
            format!("{head}{low}")
        } else {
            format!("{head}:{low}")
        };
        if let Some(z) = &self.zone {
            s.push('%');
            s.push_str(z);
        }
        s
    }
}

/// Lowercase groups with the longest run (length ≥ 2) of zero groups
/// replaced by `::`; leftmost run wins a tie.
fn compress(groups: &[u16]) -> String {
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < groups.len() {
        if groups[i] == 0 {
            let start = i;
            while i < groups.len() && groups[i] == 0 {
                i += 1;
            }
            let len = i - start;
            if len >= 2 && best.is_none_or(|(_, l)| len > l) {
                best = Some((start, len));
            }
        } else {
            i += 1;
        }
    }
    let hex = |gs: &[u16]| {
        gs.iter()
            .map(|g| format!("{g:x}"))
            .collect::<Vec<_>>()
            .join(":")
    };
    match best {
        Some((start, len)) => format!("{}::{}", hex(&groups[..start]), hex(&groups[start + len..])),
        None => hex(groups),
    }
}

impl fmt::Display for V6Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&compress(&self.groups()))?;
        if let Some(z) = &self.zone {
            write!(f, "%{z}")?;
        }
        Ok(())
    }
}

impl FromStr for V6Address {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_v6(s)
    }
}

/// Parses a full, `::`-compressed or IPv4-embedded literal with an
/// optional `%zone` suffix.
pub fn parse_v6(text: &str) -> Result<V6Address, AddrError> {
    let bad = |kind| AddrError::malformed(text, kind);
    let (addr, zone) = match text.split_once('%') {
        Some((_, "")) => return Err(bad(Malformed::EmptyZone)),
        Some((a, z)) => (a, Some(z.to_owned())),
        None => (text, None),
    };

    let (head, tail) = match addr.find("::") {
        Some(i) => {
            let rest = &addr[i + 2..];
            if rest.contains("::") {
                return Err(bad(Malformed::DoubleCompression));
            }
            (&addr[..i], Some(rest))
        }
        None => (addr, None),
    };

    // An embedded dotted quad is only legal as the final part.
    let last_side_is_head = tail.is_none();
    let mut head_groups = parse_side(head, last_side_is_head).map_err(bad)?;
    let tail_groups = match tail {
        Some(t) => parse_side(t, true).map_err(bad)?,
        None => Vec::new(),
    };

    let explicit = head_groups.len() + tail_groups.len();
    let ok = match tail {
        Some(_) => explicit <= 7,
        None => explicit == 8,
    };
    if !ok {
        return Err(bad(Malformed::GroupCount));
    }
    head_groups.resize(8 - tail_groups.len(), 0);
    head_groups.extend(tail_groups);

    let mut groups = [0u16; 8];
    groups.copy_from_slice(&head_groups);
    let mut a = V6Address::from_groups(groups);
    a.zone = zone;
    Ok(a)
}

fn parse_side(side: &str, may_end_in_v4: bool) -> Result<Vec<u16>, Malformed> {
    if side.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = side.split(':').collect();
    let mut out = Vec::with_capacity(parts.len() + 1);
    for (i, part) in parts.iter().enumerate() {
        if part.contains('.') {
            if !may_end_in_v4 || i + 1 != parts.len() {
                return Err(Malformed::BadEmbeddedV4);
            }
            let v = parse_v4(part)
                .map_err(|_| Malformed::BadEmbeddedV4)?
                .value();
            out.push((v >> 16) as u16);
            out.push(v as u16);
        } else {
            if part.is_empty() || part.len() > 4 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(Malformed::BadHex);
            }
            out.push(u16::from_str_radix(part, 16).expect("validated hex"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> V6Address {
        parse_v6(s).unwrap()
    }

    fn kind_of(s: &str) -> Malformed {
        match parse_v6(s).unwrap_err() {
            AddrError::MalformedAddress { kind, .. } => kind,
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn compressed_and_full_forms_agree() {
        assert_eq!(p("1080::8:800:200C:417A"), p("1080:0:0:0:8:800:200C:417A"));
        assert_eq!(p("FF01::101"), p("FF01:0:0:0:0:0:0:101"));
        assert_eq!(p("::1"), p("0:0:0:0:0:0:0:1"));
        assert_eq!(p("::").value(), 0);
    }

    #[test]
    fn canonical_text() {
        assert_eq!(
            p("1080:0:0:0:8:800:200C:417A").to_string(),
            "1080::8:800:200c:417a"
        );
        assert_eq!(p("FF01:0:0:0:0:0:0:101").to_string(), "ff01::101");
        assert_eq!(p("0:0:0:0:0:0:0:1").to_string(), "::1");
        assert_eq!(p("0:0:0:0:0:0:0:0").to_string(), "::");
        assert_eq!(p("2001:db8:0:1:0:0:0:1").to_string(), "2001:db8:0:1::1");
        // single zero group is never compressed
        assert_eq!(
            p("2001:db8:0:1:1:1:1:1").to_string(),
            "2001:db8:0:1:1:1:1:1"
        );
        // equal runs: leftmost wins
        assert_eq!(p("1:0:0:2:3:0:0:4").to_string(), "1::2:3:0:0:4");
    }

    #[test]
    fn longest_run_picks_four_group_form() {
        let a = p("12AB:0:0:CD30:0:0:0:0");
        // Both legal compressions name the same value.
        let legal = ["12AB::CD30:0:0:0:0", "12AB:0:0:CD30::"];
        for form in legal {
            assert_eq!(p(form), a);
        }
        // Enumerate the zero runs by hand: (1, 2) and (4, 4).
        let g = a.groups();
        let runs: Vec<(usize, usize)> = {
            let mut v = Vec::new();
            let mut i = 0;
            while i < 8 {
                if g[i] == 0 {
                    let s = i;
                    while i < 8 && g[i] == 0 {
                        i += 1;
                    }
                    v.push((s, i - s));
                } else {
                    i += 1;
                }
            }
            v
        };
        assert_eq!(runs, vec![(1, 2), (4, 4)]);
        assert_eq!(a.to_string(), "12ab:0:0:cd30::");
    }

    #[test]
    fn rejects_double_compression() {
        assert_eq!(kind_of("12AB::CD30::"), Malformed::DoubleCompression);
        assert_eq!(kind_of("1::2::3"), Malformed::DoubleCompression);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(kind_of("1:2:3:4:5:6:7"), Malformed::GroupCount);
        assert_eq!(kind_of("1:2:3:4:5:6:7:8:9"), Malformed::GroupCount);
        assert_eq!(kind_of("1:2:3:4::5:6:7:8"), Malformed::GroupCount);
        assert_eq!(kind_of("12345::"), Malformed::BadHex);
        assert_eq!(kind_of("g::"), Malformed::BadHex);
        assert_eq!(kind_of(":1:2:3:4:5:6:7"), Malformed::BadHex);
        assert_eq!(kind_of("::1.2.3.256"), Malformed::BadEmbeddedV4);
        assert_eq!(kind_of("::1.2.3.4:5"), Malformed::BadEmbeddedV4);
        assert_eq!(kind_of("fe80::1%"), Malformed::EmptyZone);
        assert_eq!(kind_of(""), Malformed::GroupCount);
    }

    #[test]
    fn embedded_v4_forms() {
        let mapped = p("::FFFF:129.144.52.38");
        assert_eq!(mapped.value(), 0xFFFF_8190_3426);
        assert_eq!(mapped, p("0:0:0:0:0:FFFF:8190:3426"));
        assert_eq!(mapped.to_embedded_v4_string(), "::ffff:129.144.52.38");
        assert_eq!(mapped.to_string(), "::ffff:8190:3426");

        let compat = p("::13.1.68.3");
        assert_eq!(compat, p("0:0:0:0:0:0:13.1.68.3"));
        assert_eq!(compat.value(), 0x0D01_4403);
        assert_eq!(compat.to_embedded_v4_string(), "::13.1.68.3");

        assert_eq!(
            p("1:2:3:4:5:6:7:8").to_embedded_v4_string(),
            "1:2:3:4:5:6:0.7.0.8"
        );
    }

    #[test]
    fn zones() {
        let a = p("fe80::1234%1");
        assert_eq!(a.zone(), Some("1"));
        assert_eq!(a.to_string(), "fe80::1234%1");
        assert_ne!(a, p("fe80::1234%eth0"));
        assert_ne!(a, p("fe80::1234"));
        assert!(V6Address::new(1).with_zone("").is_err());
    }

    #[test]
    fn kinds() {
        let cases = [
            ("::", V6Kind::Unspecified),
            ("::1", V6Kind::Loopback),
            ("::2", V6Kind::GlobalUnicast),
            ("fc00::1", V6Kind::UniqueLocalUnicast),
            ("fdff:ffff::", V6Kind::UniqueLocalUnicast),
            ("fe00::", V6Kind::GlobalUnicast),
            ("fe80::1234", V6Kind::LinkLocalUnicast),
            ("febf:ffff::", V6Kind::LinkLocalUnicast),
            ("fec0::", V6Kind::GlobalUnicast),
            ("ff02::1", V6Kind::Multicast),
            ("ff01::101", V6Kind::Multicast),
            ("2001:db8::1", V6Kind::Documentation),
            ("2001:db8:ffff:ffff::", V6Kind::Documentation),
            ("2001:db9::", V6Kind::GlobalUnicast),
            ("2001:470::1", V6Kind::GlobalUnicast),
        ];
        for (s, k) in cases {
            assert_eq!(p(s).kind(), k, "{s}");
        }
    }

    fn groups_strategy() -> impl Strategy<Value = [u16; 8]> {
        // Bias towards zero groups so compression paths are exercised.
        prop::array::uniform8(prop_oneof![3 => Just(0u16), 1 => any::<u16>()])
    }

    proptest! {
        #[test]
        fn canonical_round_trip(g in groups_strategy()) {
            let a = V6Address::from_groups(g);
            let text = a.to_string();
            prop_assert_eq!(parse_v6(&text).unwrap(), a.clone());
            // idempotent
            prop_assert_eq!(parse_v6(&text).unwrap().to_string(), text.clone());
            prop_assert!(text.matches("::").count() <= 1);
            prop_assert_eq!(text.to_lowercase(), text);
        }

        #[test]
        fn embedded_round_trip(g in groups_strategy()) {
            let a = V6Address::from_groups(g);
            prop_assert_eq!(parse_v6(&a.to_embedded_v4_string()).unwrap(), a);
        }

        #[test]
        fn full_uppercase_form_parses(v: u128) {
            let a = V6Address::new(v);
            let full = a.groups().iter().map(|g| format!("{g:04X}")).collect::<Vec<_>>().join(":");
            prop_assert_eq!(parse_v6(&full).unwrap(), a);
        }
    }
}
