use super::trace::{HostAddr, PacketRecord};
use super::AggError;
use crate::addr::{V4Address, V6Address};

/// IP protocol / next-header number used for carriers (RFC 3692
/// experimental), since a burst may mix IPv4 and IPv6 inner packets.
pub const CARRIER_PROTOCOL: u8 = 253;
const UDP: u8 = 17;
const HOP_BY_HOP: u8 = 0;
const JUMBO_OPTION: u8 = 0xC2;
pub const MAX_V4_CARRIER_PAYLOAD: usize = 65_535 - 20;

/// RFC 1071 ones-complement sum over 16-bit big-endian words.
pub fn internet_checksum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = bytes
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]) as u32)
        .sum();
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

fn v4_header(total_len: u16, id: u16, protocol: u8, src: V4Address, dst: V4Address) -> [u8; 20] {
    let mut h = [0u8; 20];
    h[0] = 0x45;
    h[2..4].copy_from_slice(&total_len.to_be_bytes());
    h[4..6].copy_from_slice(&id.to_be_bytes());
    h[8] = 64;
    h[9] = protocol;
    h[12..16].copy_from_slice(&src.octets());
    h[16..20].copy_from_slice(&dst.octets());
    let ck = internet_checksum(&h);
    h[10..12].copy_from_slice(&ck.to_be_bytes());
    h
}

fn v6_header(payload_len: u16, next_header: u8, src: &V6Address, dst: &V6Address) -> [u8; 40] {
    let mut h = [0u8; 40];
    h[0] = 0x60;
    h[4..6].copy_from_slice(&payload_len.to_be_bytes());
    h[6] = next_header;
    h[7] = 64;
    h[8..24].copy_from_slice(&src.value().to_be_bytes());
    h[24..40].copy_from_slice(&dst.value().to_be_bytes());
    h
}

/// Serializes a trace record: base header, a UDP header when there is room
/// for one, then filler bytes derived from the timestamp.
pub fn packet_bytes(rec: &PacketRecord) -> Vec<u8> {
    let payload = rec.payload_len() as usize;
    let proto = if payload >= 8 { UDP } else { CARRIER_PROTOCOL };
    let mut out = Vec::with_capacity(rec.total_len as usize);
    match (&rec.src, &rec.dst) {
        (HostAddr::V4(s), HostAddr::V4(d)) => {
            out.extend(v4_header(
                rec.total_len as u16,
                rec.ts_us as u16,
                proto,
                *s,
                *d,
            ));
        }
        (HostAddr::V6(s), HostAddr::V6(d)) => {
            out.extend(v6_header(payload as u16, proto, s, d));
        }
        _ => unreachable!("PacketRecord::new checks versions"),
    }
    if payload >= 8 {
        out.extend(rec.sport.to_be_bytes());
        out.extend(rec.dport.to_be_bytes());
        out.extend((payload as u16).to_be_bytes());
        out.extend([0, 0]);
    }
    let seed = rec.ts_us as u8;
    let start = out.len();
    out.extend((start..rec.total_len as usize).map(|k| (k as u8).wrapping_mul(31) ^ seed));
    out
}

/// Outer header addresses for a carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Carrier {
    V4 { src: V4Address, dst: V4Address },
    V6 { src: V6Address, dst: V6Address },
}

impl Carrier {
    /// 192.0.2.1 → 192.0.2.2
    pub fn v4_default() -> Self {
        Carrier::V4 {
            src: V4Address::new(0xC000_0201),
            dst: V4Address::new(0xC000_0202),
        }
    }

    /// 2001:db8::1 → 2001:db8::2
    pub fn v6_default() -> Self {
        Carrier::V6 {
            src: V6Address::new((0x2001_0db8u128 << 96) | 1),
            dst: V6Address::new((0x2001_0db8u128 << 96) | 2),
        }
    }
}

/// Wraps already serialized packets, back to back, in one carrier packet.
/// IPv6 payloads over 65535 bytes use the jumbogram form: payload length
/// 0 and a hop-by-hop jumbo payload option.
pub fn aggregate_packets(inner: &[Vec<u8>], carrier: &Carrier) -> Result<Vec<u8>, AggError> {
    let payload: usize = inner.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(payload + 48);
    match carrier {
        Carrier::V4 { src, dst } => {
            if payload > MAX_V4_CARRIER_PAYLOAD {
                return Err(AggError::Overflow {
                    payload,
                    max: MAX_V4_CARRIER_PAYLOAD,
                });
            }
            out.extend(v4_header(
                (payload + 20) as u16,
                0,
                CARRIER_PROTOCOL,
                *src,
                *dst,
            ));
        }
        Carrier::V6 { src, dst } => {
            if let Ok(len) = u16::try_from(payload) {
                out.extend(v6_header(len, CARRIER_PROTOCOL, src, dst));
            } else {
                // jumbo length counts the hop-by-hop header too
                let max = u32::MAX as usize - 8;
                if payload > max {
                    return Err(AggError::Overflow { payload, max });
                }
                out.extend(v6_header(0, HOP_BY_HOP, src, dst));
                out.extend([CARRIER_PROTOCOL, 0, JUMBO_OPTION, 4]);
                out.extend(((payload + 8) as u32).to_be_bytes());
            }
        }
    }
    for p in inner {
        out.extend_from_slice(p);
    }
    Ok(out)
}

fn carrier_payload(bytes: &[u8]) -> Result<&[u8], AggError> {
    let bad = |s: &str| Err(AggError::BadCarrier(s.into()));
    let Some(&first) = bytes.first() else {
        return bad("empty");
    };
    match first >> 4 {
        4 => {
            if bytes.len() < 20 {
                return Err(AggError::TruncatedPayload);
            }
            let ihl = (first & 0x0F) as usize * 4;
            if ihl < 20 || bytes.len() < ihl {
                return bad("header length");
            }
            if internet_checksum(&bytes[..ihl]) != 0 {
                return bad("header checksum");
            }
            if bytes[9] != CARRIER_PROTOCOL {
                return bad("protocol");
            }
            let total = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
            if total < ihl {
                return bad("total length");
            }
            if total > bytes.len() {
                return Err(AggError::TruncatedPayload);
            }
            Ok(&bytes[ihl..total])
        }
        6 => {
            if bytes.len() < 40 {
                return Err(AggError::TruncatedPayload);
            }
            let plen = u16::from_be_bytes([bytes[4], bytes[5]]) as usize;
            let nh = bytes[6];
            let (start, len) = if plen == 0 && nh == HOP_BY_HOP {
                if bytes.len() < 48 {
                    return Err(AggError::TruncatedPayload);
                }
                if bytes[40] != CARRIER_PROTOCOL || bytes[42] != JUMBO_OPTION || bytes[43] != 4 {
                    return bad("jumbo option");
                }
                let jumbo =
                    u32::from_be_bytes([bytes[44], bytes[45], bytes[46], bytes[47]]) as usize;
                if jumbo <= 65_535 {
                    return bad("jumbo length");
                }
                (48, jumbo - 8)
            } else if nh == CARRIER_PROTOCOL {
                (40, plen)
            } else {
                return bad("next header");
            };
            if start + len > bytes.len() {
                return Err(AggError::TruncatedPayload);
            }
            Ok(&bytes[start..start + len])
        }
        _ => bad("version"),
    }
}

/// Strips the carrier header and splits the payload into the original
/// packets using each inner header's length field.
pub fn disaggregate(carrier: &[u8]) -> Result<Vec<Vec<u8>>, AggError> {
    let payload = carrier_payload(carrier)?;
    let mut out = Vec::new();
    let mut off = 0;
    while off < payload.len() {
        let rest = &payload[off..];
        let len = match rest[0] >> 4 {
            4 => {
                if rest.len() < 20 {
                    return Err(AggError::TruncatedPayload);
                }
                let total = u16::from_be_bytes([rest[2], rest[3]]) as usize;
                let ihl = (rest[0] & 0x0F) as usize * 4;
                if ihl < 20 || total < ihl {
                    return Err(AggError::BadInnerHeader { offset: off });
                }
                total
            }
            6 => {
                if rest.len() < 40 {
                    return Err(AggError::TruncatedPayload);
                }
                40 + u16::from_be_bytes([rest[4], rest[5]]) as usize
            }
            _ => return Err(AggError::BadInnerHeader { offset: off }),
        };
        if len > rest.len() {
            return Err(AggError::TruncatedPayload);
        }
        out.push(rest[..len].to_vec());
        off += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v4rec(len: u32) -> PacketRecord {
        PacketRecord::new(
            7,
            "10.0.0.1".parse().unwrap(),
            "10.0.0.2".parse().unwrap(),
            4000,
            53,
            len,
        )
        .unwrap()
    }

    fn v6rec(len: u32) -> PacketRecord {
        PacketRecord::new(
            9,
            "2001:db8::a".parse().unwrap(),
            "2001:db8::b".parse().unwrap(),
            4000,
            53,
            len,
        )
        .unwrap()
    }

    #[test]
    fn checksum_matches_known_header() {
        // Widely published example header: 192.168.0.1 → 192.168.0.199, UDP,
        // total length 115, DF set, checksum 0xb861.
        let mut h: [u8; 20] = [
            0x45, 0x00, 0x00, 0x73, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11, 0x00, 0x00, 0xc0, 0xa8,
            0x00, 0x01, 0xc0, 0xa8, 0x00, 0xc7,
        ];
        assert_eq!(internet_checksum(&h), 0xb861);
        h[10..12].copy_from_slice(&[0xb8, 0x61]);
        assert_eq!(internet_checksum(&h), 0);
        // odd length pads with zero
        assert_eq!(internet_checksum(&[0xff]), !0xff00);
    }

    #[test]
    fn serialized_record_layout() {
        let b = packet_bytes(&v4rec(100));
        assert_eq!(b.len(), 100);
        assert_eq!(b[0], 0x45);
        assert_eq!(u16::from_be_bytes([b[2], b[3]]), 100);
        assert_eq!(b[9], 17);
        assert_eq!(internet_checksum(&b[..20]), 0);
        assert_eq!(&b[12..16], &[10, 0, 0, 1]);
        assert_eq!(u16::from_be_bytes([b[20], b[21]]), 4000);
        assert_eq!(u16::from_be_bytes([b[24], b[25]]), 80);

        let tiny = packet_bytes(&v4rec(24));
        assert_eq!(tiny.len(), 24);
        assert_eq!(tiny[9], CARRIER_PROTOCOL);

        let b6 = packet_bytes(&v6rec(140));
        assert_eq!(b6.len(), 140);
        assert_eq!(b6[0] >> 4, 6);
        assert_eq!(u16::from_be_bytes([b6[4], b6[5]]), 100);
        assert_eq!(b6[6], 17);
    }

    #[test]
    fn single_inner_v4_carrier() {
        let inner = packet_bytes(&v4rec(100));
        let c = aggregate_packets(std::slice::from_ref(&inner), &Carrier::v4_default()).unwrap();
        assert_eq!(c.len(), 120);
        assert_eq!(u16::from_be_bytes([c[2], c[3]]), 120);
        assert_eq!(c[9], CARRIER_PROTOCOL);
        assert_eq!(internet_checksum(&c[..20]), 0);
        // independent expectation for the whole header
        let mut want: [u8; 20] = [
            0x45, 0, 0, 120, 0, 0, 0, 0, 64, 253, 0, 0, 192, 0, 2, 1, 192, 0, 2, 2,
        ];
        let sum: u32 = want
            .chunks(2)
            .map(|w| u16::from_be_bytes([w[0], w[1]]) as u32)
            .sum();
        let ck = !(((sum & 0xFFFF) + (sum >> 16)) as u16);
        want[10..12].copy_from_slice(&ck.to_be_bytes());
        assert_eq!(&c[..20], &want);
        assert_eq!(disaggregate(&c).unwrap(), vec![inner]);
    }

    #[test]
    fn v4_overflow_and_v6_jumbogram() {
        let inner: Vec<Vec<u8>> = (0..10).map(|_| packet_bytes(&v4rec(7_000))).collect();
        let total: usize = inner.iter().map(Vec::len).sum();
        assert_eq!(total, 70_000);
        assert_eq!(
            aggregate_packets(&inner, &Carrier::v4_default()).unwrap_err(),
            AggError::Overflow {
                payload: 70_000,
                max: 65_515
            }
        );
        let c = aggregate_packets(&inner, &Carrier::v6_default()).unwrap();
        assert_eq!(c.len(), 40 + 8 + 70_000);
        assert_eq!(u16::from_be_bytes([c[4], c[5]]), 0);
        assert_eq!(c[6], 0);
        assert_eq!(&c[40..44], &[253, 0, 0xC2, 4]);
        assert_eq!(u32::from_be_bytes([c[44], c[45], c[46], c[47]]), 70_008);
        assert_eq!(disaggregate(&c).unwrap(), inner);
    }

    #[test]
    fn v4_carrier_edge_of_limit() {
        let mut p = vec![0u8; 65_515];
        assert!(aggregate_packets(&[p.clone()], &Carrier::v4_default()).is_ok());
        p.push(0);
        assert!(aggregate_packets(&[p], &Carrier::v4_default()).is_err());
    }

    #[test]
    fn mixed_versions_in_order() {
        let inner = vec![
            packet_bytes(&v4rec(60)),
            packet_bytes(&v6rec(90)),
            packet_bytes(&v4rec(1500)),
        ];
        for carrier in [Carrier::v4_default(), Carrier::v6_default()] {
            let c = aggregate_packets(&inner, &carrier).unwrap();
            assert_eq!(disaggregate(&c).unwrap(), inner);
        }
    }

    #[test]
    fn damaged_carriers() {
        let inner = vec![packet_bytes(&v4rec(60)), packet_bytes(&v6rec(90))];
        let c = aggregate_packets(&inner, &Carrier::v6_default()).unwrap();
        // cut mid inner header: fix the carrier length so only the inner walk fails
        let mut cut = c[..40 + 60 + 10].to_vec();
        cut[4..6].copy_from_slice(&70u16.to_be_bytes());
        assert_eq!(disaggregate(&cut), Err(AggError::TruncatedPayload));
        // carrier claims more than it has
        assert_eq!(
            disaggregate(&c[..c.len() - 1]),
            Err(AggError::TruncatedPayload)
        );
        // inner version nibble broken
        let mut bad = c.clone();
        bad[40] = 0x55;
        assert_eq!(
            disaggregate(&bad),
            Err(AggError::BadInnerHeader { offset: 0 })
        );
        // inner v4 total length below its header length
        let mut short = c.clone();
        short[42..44].copy_from_slice(&10u16.to_be_bytes());
        assert_eq!(
            disaggregate(&short),
            Err(AggError::BadInnerHeader { offset: 0 })
        );

        let c4 = aggregate_packets(&inner, &Carrier::v4_default()).unwrap();
        let mut flipped = c4.clone();
        flipped[8] ^= 1;
        assert!(matches!(
            disaggregate(&flipped),
            Err(AggError::BadCarrier(_))
        ));
        assert!(matches!(disaggregate(&[]), Err(AggError::BadCarrier(_))));
        assert_eq!(disaggregate(&c4[..10]), Err(AggError::TruncatedPayload));
        let empty = aggregate_packets(&[], &Carrier::v4_default()).unwrap();
        assert_eq!(disaggregate(&empty).unwrap(), Vec::<Vec<u8>>::new());
    }

    fn record_strategy() -> impl Strategy<Value = PacketRecord> {
        (any::<bool>(), 0u64..1_000_000, 0u32..4000).prop_map(|(v6, ts, extra)| {
            let (src, dst, base) = if v6 {
                ("2001:db8::1", "2001:db8::2", 40)
            } else {
                ("10.0.0.1", "10.0.0.2", 20)
            };
            PacketRecord::new(
                ts,
                src.parse().unwrap(),
                dst.parse().unwrap(),
                1,
                2,
                base + extra,
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip(recs in prop::collection::vec(record_strategy(), 0..20), v6 in any::<bool>()) {
            let inner: Vec<Vec<u8>> = recs.iter().map(packet_bytes).collect();
            let carrier = if v6 { Carrier::v6_default() } else { Carrier::v4_default() };
            let c = aggregate_packets(&inner, &carrier).unwrap();
            if !v6 {
                prop_assert_eq!(internet_checksum(&c[..20]), 0);
            }
            prop_assert_eq!(disaggregate(&c).unwrap(), inner);
        }
    }
}
