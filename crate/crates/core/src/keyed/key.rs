use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::addr::V6Address;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("a key needs at least 2 values, got {0}")]
    TooShort(usize),
    #[error("key value at index {0} repeats an earlier value")]
    Duplicate(usize),
    #[error("key mixes port numbers and addresses")]
    MixedKinds,
    #[error("source and destination sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// One element of a key: a UDP port (KUDP) or an IPv6 address (K-IPv6).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KeyValue {
    Port(u16),
    Addr(V6Address),
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Port(p) => write!(f, "{p}"),
            KeyValue::Addr(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyMode {
    SourceKeyed,
    DestinationKeyed,
    SourceDestinationKeyed,
}

/// What a sender stamps on one datagram, or what a receiver observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyPoint<'a> {
    Source(&'a KeyValue),
    Destination(&'a KeyValue),
    Pair {
        source: &'a KeyValue,
        destination: &'a KeyValue,
    },
}

/// An ordered set of ports or addresses used round-robin, one per
/// datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Key {
    mode: KeyMode,
    source: Vec<KeyValue>,
    // empty unless mode is SourceDestinationKeyed
    destination: Vec<KeyValue>,
}

fn validate(values: &[KeyValue]) -> Result<(), KeyError> {
    if values.len() < 2 {
        return Err(KeyError::TooShort(values.len()));
    }
    let ports = matches!(values[0], KeyValue::Port(_));
    if values
        .iter()
        .any(|v| matches!(v, KeyValue::Port(_)) != ports)
    {
        return Err(KeyError::MixedKinds);
    }
    let mut seen = HashSet::new();
    for (i, v) in values.iter().enumerate() {
        if !seen.insert(v) {
            return Err(KeyError::Duplicate(i));
        }
    }
    Ok(())
}

impl Key {
    pub fn source_keyed(values: Vec<KeyValue>) -> Result<Self, KeyError> {
        validate(&values)?;
        Ok(Key {
            mode: KeyMode::SourceKeyed,
            source: values,
            destination: Vec::new(),
        })
    }

    pub fn destination_keyed(values: Vec<KeyValue>) -> Result<Self, KeyError> {
        validate(&values)?;
        Ok(Key {
            mode: KeyMode::DestinationKeyed,
            source: values,
            destination: Vec::new(),
        })
    }

    pub fn source_destination_keyed(
        source: Vec<KeyValue>,
        destination: Vec<KeyValue>,
    ) -> Result<Self, KeyError> {
        validate(&source)?;
        validate(&destination)?;
        if source.len() != destination.len() {
            return Err(KeyError::LengthMismatch(source.len(), destination.len()));
        }
        Ok(Key {
            mode: KeyMode::SourceDestinationKeyed,
            source,
            destination,
        })
    }

    /// Destination-keyed KUDP over a contiguous port range, e.g.
    /// `7000..=7004`.
    pub fn port_range(ports: std::ops::RangeInclusive<u16>) -> Result<Self, KeyError> {
        Key::destination_keyed(ports.map(KeyValue::Port).collect())
    }

    pub fn mode(&self) -> KeyMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Key index for the 1-based send sequence number.
    ///
    /// # Panics
    /// If `seq_no` is 0.
    pub fn index_for(&self, seq_no: u64) -> usize {
        assert!(seq_no >= 1, "sequence numbers start at 1");
        ((seq_no - 1) % self.len() as u64) as usize
    }

    /// The value(s) stamped on datagram number `seq_no` (1-based).
    ///
    /// # Panics
    /// If `seq_no` is 0.
    pub fn value_for(&self, seq_no: u64) -> KeyPoint<'_> {
        let i = self.index_for(seq_no);
        match self.mode {
            KeyMode::SourceKeyed => KeyPoint::Source(&self.source[i]),
            KeyMode::DestinationKeyed => KeyPoint::Destination(&self.source[i]),
            KeyMode::SourceDestinationKeyed => KeyPoint::Pair {
                source: &self.source[i],
                destination: &self.destination[i],
            },
        }
    }

    /// Receiver side: maps an observed value back to its key index. A pair
    /// only matches when both halves sit at the same index.
    pub fn index_of(&self, observed: KeyPoint<'_>) -> Option<usize> {
        let find = |seq: &[KeyValue], v: &KeyValue| seq.iter().position(|x| x == v);
        match (self.mode, observed) {
            (KeyMode::SourceKeyed, KeyPoint::Source(v))
            | (KeyMode::DestinationKeyed, KeyPoint::Destination(v)) => find(&self.source, v),
            (
                KeyMode::SourceDestinationKeyed,
                KeyPoint::Pair {
                    source,
                    destination,
                },
            ) => {
                let i = find(&self.source, source)?;
                (self.destination[i] == *destination).then_some(i)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn port(p: &KeyPoint<'_>) -> u16 {
        match p {
            KeyPoint::Destination(KeyValue::Port(x)) | KeyPoint::Source(KeyValue::Port(x)) => *x,
            other => panic!("not a port: {other:?}"),
        }
    }

    #[test]
    fn round_robin_ports() {
        let k = Key::port_range(7000..=7004).unwrap();
        assert_eq!(port(&k.value_for(1)), 7000);
        assert_eq!(port(&k.value_for(5)), 7004);
        assert_eq!(port(&k.value_for(6)), 7000);
        assert_eq!(port(&k.value_for(11)), 7000);
        assert_eq!(k.index_for(11), 0);
        assert_eq!(k.index_for(13), 2);
    }

    #[test]
    fn construction_rules() {
        assert_eq!(
            Key::port_range(7000..=7000).unwrap_err(),
            KeyError::TooShort(1)
        );
        assert_eq!(
            Key::source_keyed(vec![
                KeyValue::Port(1),
                KeyValue::Port(2),
                KeyValue::Port(1)
            ])
            .unwrap_err(),
            KeyError::Duplicate(2)
        );
        let a: V6Address = "2001:db8::1".parse().unwrap();
        assert_eq!(
            Key::source_keyed(vec![KeyValue::Port(1), KeyValue::Addr(a)]).unwrap_err(),
            KeyError::MixedKinds
        );
        let ports = |r: std::ops::Range<u16>| r.map(KeyValue::Port).collect::<Vec<_>>();
        assert_eq!(
            Key::source_destination_keyed(ports(1..4), ports(10..12)).unwrap_err(),
            KeyError::LengthMismatch(3, 2)
        );
    }

    #[test]
    fn address_keys_and_pairs() {
        let addrs: Vec<KeyValue> = (1..=4u128)
            .map(|i| KeyValue::Addr(V6Address::new((0x2001_0db8u128 << 96) | i)))
            .collect();
        let dst: Vec<KeyValue> = (5001..=5004).map(KeyValue::Port).collect();
        let k = Key::source_destination_keyed(addrs.clone(), dst.clone()).unwrap();
        assert_eq!(k.mode(), KeyMode::SourceDestinationKeyed);
        match k.value_for(7) {
            KeyPoint::Pair {
                source,
                destination,
            } => {
                assert_eq!(source.to_string(), "2001:db8::3");
                assert_eq!(*destination, KeyValue::Port(5003));
            }
            other => panic!("{other:?}"),
        }
        // halves from different indices do not identify a slot
        let crossed = KeyPoint::Pair {
            source: &addrs[0],
            destination: &dst[1],
        };
        assert_eq!(k.index_of(crossed), None);
        // wrong mode never matches
        assert_eq!(k.index_of(KeyPoint::Source(&addrs[0])), None);
    }

    proptest! {
        #[test]
        fn index_of_inverts_value_for(n in 2u16..300, seq in 1u64..100_000) {
            let k = Key::port_range(1000..=999 + n).unwrap();
            let expected = ((seq - 1) % n as u64) as usize;
            prop_assert_eq!(k.index_of(k.value_for(seq)), Some(expected));
        }
    }
}
