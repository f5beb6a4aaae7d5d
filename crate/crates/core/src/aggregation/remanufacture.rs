use std::collections::HashMap;
use std::fmt::Write as _;

use super::trace::{HostAddr, IpVersion, PacketRecord, Trace};
use super::AggError;

const V4_HEADER: u64 = 20;
const V6_HEADER: u64 = 40;

pub const VICINITIES_US: [u64; 3] = [100, 500, 1_000];
pub const SIZE_LIMITS: [u32; 3] = [1_500, 9_000, 65_535];

/// Totals before and after an IPv4 to IPv6 conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConversionStats {
    pub packets_in: u64,
    pub packets_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub payload_in: u64,
    pub payload_out: u64,
}

impl ConversionStats {
    pub fn packet_ratio(&self) -> f64 {
        self.packets_out as f64 / self.packets_in as f64
    }

    pub fn byte_ratio(&self) -> f64 {
        self.bytes_out as f64 / self.bytes_in as f64
    }

    fn emit(&mut self, payload: u64, cap: u64) {
        let parts = segment(payload, cap);
        self.packets_out += parts.len() as u64;
        self.payload_out += parts.iter().sum::<u64>();
        self.bytes_out += parts.iter().map(|p| p + V6_HEADER).sum::<u64>();
    }
}

/// Splits `payload` into full `cap`-sized pieces followed by the remainder.
/// An empty payload still needs one packet.
pub fn segment(payload: u64, cap: u64) -> Vec<u64> {
    assert!(cap > 0, "segment cap must be positive");
    if payload == 0 {
        return vec![0];
    }
    let mut out = vec![cap; (payload / cap) as usize];
    if !payload.is_multiple_of(cap) {
        out.push(payload % cap);
    }
    out
}

fn check_v4(trace: &Trace) -> Result<(), AggError> {
    match trace
        .records()
        .iter()
        .position(|r| r.version() != IpVersion::V4)
    {
        Some(index) => Err(AggError::NotIpv4 { index }),
        None => Ok(()),
    }
}

fn v6_cap(limit: u32) -> Result<u64, AggError> {
    if (limit as u64) <= V6_HEADER {
        return Err(AggError::InvalidLimit(limit));
    }
    Ok(limit as u64 - V6_HEADER)
}

fn count_input(stats: &mut ConversionStats, r: &PacketRecord) {
    stats.packets_in += 1;
    stats.bytes_in += r.total_len as u64;
    stats.payload_in += r.total_len as u64 - V4_HEADER;
}

/// Packet-by-packet conversion: each IPv4 payload is carried in IPv6
/// packets no larger than `mtu`.
pub fn header_swap_analysis(trace: &Trace, mtu: u32) -> Result<ConversionStats, AggError> {
    check_v4(trace)?;
    let cap = v6_cap(mtu)?;
    let mut stats = ConversionStats::default();
    for r in trace.records() {
        count_input(&mut stats, r);
        stats.emit(r.total_len as u64 - V4_HEADER, cap);
    }
    Ok(stats)
}

type FlowKey = (HostAddr, HostAddr, u16, u16, IpVersion);

/// Payloads of consecutive same-flow packets no more than `vicinity_us`
/// apart are merged into one datum, which is then cut into IPv6 packets of
/// at most `limit` bytes.
pub fn payload_reconstruct_analysis(
    trace: &Trace,
    vicinity_us: u64,
    limit: u32,
) -> Result<ConversionStats, AggError> {
    check_v4(trace)?;
    let cap = v6_cap(limit)?;
    let mut stats = ConversionStats::default();
    // flow -> (last timestamp, accumulated payload)
    let mut open: HashMap<FlowKey, (u64, u64)> = HashMap::new();
    for r in trace.records() {
        count_input(&mut stats, r);
        let payload = r.total_len as u64 - V4_HEADER;
        let key = (r.src.clone(), r.dst.clone(), r.sport, r.dport, r.version());
        match open.get_mut(&key) {
            Some((last, acc)) if r.ts_us - *last <= vicinity_us => {
                *last = r.ts_us;
                *acc += payload;
            }
            Some(group) => {
                stats.emit(group.1, cap);
                *group = (r.ts_us, payload);
            }
            None => {
                open.insert(key, (r.ts_us, payload));
            }
        }
    }
    for (_, acc) in open.into_values() {
        stats.emit(acc, cap);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameterization: String,
    pub stats: ConversionStats,
}

/// Header swap at each size limit, then payload reconstruction over every
/// vicinity and limit pair.
pub fn remanufacture_sweep(trace: &Trace) -> Result<Vec<SweepRow>, AggError> {
    let mut rows = Vec::new();
    for limit in SIZE_LIMITS {
        rows.push(SweepRow {
            parameterization: format!("swap mtu={limit}"),
            stats: header_swap_analysis(trace, limit)?,
        });
    }
    for v in VICINITIES_US {
        for limit in SIZE_LIMITS {
            rows.push(SweepRow {
                parameterization: format!("reconstruct vicinity_us={v} limit={limit}"),
                stats: payload_reconstruct_analysis(trace, v, limit)?,
            });
        }
    }
    Ok(rows)
}

pub fn stats_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameterization,packet_ratio,byte_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6}",
            r.parameterization,
            r.stats.packet_ratio(),
            r.stats.byte_ratio()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{generate_trace, SizeDist, TraceProfile};
    use proptest::prelude::*;

    fn rec(ts: u64, sport: u16, len: u32) -> PacketRecord {
        PacketRecord::new(
            ts,
            "10.0.0.1".parse().unwrap(),
            "10.0.0.2".parse().unwrap(),
            sport,
            80,
            len,
        )
        .unwrap()
    }

    fn trace(recs: Vec<PacketRecord>) -> Trace {
        Trace::new(recs).unwrap()
    }

    #[test]
    fn segment_splits_full_first() {
        assert_eq!(segment(1480, 1460), vec![1460, 20]);
        assert_eq!(segment(2920, 1460), vec![1460, 1460]);
        assert_eq!(segment(80, 1460), vec![80]);
        assert_eq!(segment(0, 1460), vec![0]);
    }

    #[test]
    fn swap_full_size_packet() {
        let s = header_swap_analysis(&trace(vec![rec(0, 1, 1500)]), 1500).unwrap();
        assert_eq!(s.packets_out, 2);
        assert_eq!(s.bytes_out, 1500 + 40 + 40 - 20);
        assert_eq!(s.packet_ratio(), 2.0);
    }

    #[test]
    fn swap_small_packet() {
        let s = header_swap_analysis(&trace(vec![rec(0, 1, 100)]), 1500).unwrap();
        assert_eq!((s.packets_out, s.bytes_out), (1, 120));
    }

    #[test]
    fn swap_all_small() {
        let t = trace((0..50).map(|i| rec(i, 1, 40 + i as u32 * 20)).collect());
        let s = header_swap_analysis(&t, 1500).unwrap();
        assert_eq!(s.packet_ratio(), 1.0);
        assert!(s.byte_ratio() > 1.0);
    }

    #[test]
    fn swap_borderline_sizes_split() {
        // v4 payload 1441..1460 fits, 1461..1480 needs a second v6 packet
        for len in 1461..=1500u32 {
            let s = header_swap_analysis(&trace(vec![rec(0, 1, len)]), 1500).unwrap();
            assert_eq!(s.packets_out, if len > 1480 { 2 } else { 1 }, "len {len}");
        }
    }

    #[test]
    fn reconstruct_one_flow() {
        let t = trace((0..10).map(|i| rec(i * 10, 1, 1500)).collect());
        let s = payload_reconstruct_analysis(&t, 100, 9000).unwrap();
        assert_eq!(s.packets_out, 2);
        assert!((s.packet_ratio() - 0.2).abs() < 1e-12);
        assert_eq!(s.payload_out, 14_800);
    }

    #[test]
    fn reconstruct_gap_splits() {
        let t = trace(vec![rec(0, 1, 1000), rec(50, 1, 1000), rec(200, 1, 1000)]);
        let s = payload_reconstruct_analysis(&t, 100, 9000).unwrap();
        assert_eq!(s.packets_out, 2);
        // gap measured between consecutive packets, not from the first
        let t = trace(vec![rec(0, 1, 1000), rec(90, 1, 1000), rec(180, 1, 1000)]);
        assert_eq!(
            payload_reconstruct_analysis(&t, 100, 9000)
                .unwrap()
                .packets_out,
            1
        );
    }

    #[test]
    fn reconstruct_separates_flows() {
        let t = trace(vec![rec(0, 1, 1000), rec(1, 2, 1000), rec(2, 1, 1000)]);
        assert_eq!(
            payload_reconstruct_analysis(&t, 100, 9000)
                .unwrap()
                .packets_out,
            2
        );
    }

    #[test]
    fn reconstruct_sub_mtu_singletons() {
        let t = trace(
            (1481..=1500u32)
                .map(|len| rec(len as u64 * 1000, 1, len))
                .collect(),
        );
        let s = payload_reconstruct_analysis(&t, 100, 1500).unwrap();
        assert_eq!(s.packets_in, 20);
        assert_eq!(s.packets_out, 40);
        assert!(s.packet_ratio() >= 1.0);
    }

    #[test]
    fn rejects_v6_and_tiny_limits() {
        let v6 = PacketRecord::new(
            0,
            "2001:db8::1".parse().unwrap(),
            "2001:db8::2".parse().unwrap(),
            1,
            2,
            100,
        )
        .unwrap();
        let t = trace(vec![rec(0, 1, 100), v6]);
        assert_eq!(
            header_swap_analysis(&t, 1500),
            Err(AggError::NotIpv4 { index: 1 })
        );
        assert_eq!(
            payload_reconstruct_analysis(&t, 100, 1500),
            Err(AggError::NotIpv4 { index: 1 })
        );
        let t = trace(vec![rec(0, 1, 100)]);
        assert_eq!(
            header_swap_analysis(&t, 40),
            Err(AggError::InvalidLimit(40))
        );
    }

    #[test]
    fn sweep_ratios_fall_with_coalescing() {
        let t = generate_trace(&TraceProfile {
            packets: 20_000,
            seed: 3,
            ..TraceProfile::default()
        })
        .unwrap();
        let rows = remanufacture_sweep(&t).unwrap();
        assert_eq!(rows.len(), 12);
        let ratio = |name: String| {
            rows.iter()
                .find(|r| r.parameterization == name)
                .unwrap()
                .stats
                .packet_ratio()
        };
        for v in VICINITIES_US {
            let rs: Vec<f64> = SIZE_LIMITS
                .iter()
                .map(|l| ratio(format!("reconstruct vicinity_us={v} limit={l}")))
                .collect();
            assert!(rs.windows(2).all(|w| w[1] <= w[0]), "{rs:?}");
        }
        for l in SIZE_LIMITS {
            let rs: Vec<f64> = VICINITIES_US
                .iter()
                .map(|v| ratio(format!("reconstruct vicinity_us={v} limit={l}")))
                .collect();
            assert!(rs.windows(2).all(|w| w[1] <= w[0]), "{rs:?}");
        }
        assert!(ratio("reconstruct vicinity_us=500 limit=9000".into()) < 1.0);
        let csv = stats_csv(&rows);
        assert!(csv.starts_with("parameterization,packet_ratio,byte_ratio\nswap mtu=1500,"));
        assert_eq!(csv.lines().count(), 13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conversions_conserve_payload(seed: u64, vicinity in 0u64..2_000, li in 0usize..3, fixed in proptest::bool::ANY) {
            let sizes = if fixed { SizeDist::fixed(1500) } else { SizeDist::internet_mix() };
            let t = generate_trace(&TraceProfile { packets: 500, seed, sizes, ..TraceProfile::default() }).unwrap();
            let limit = SIZE_LIMITS[li];
            let swap = header_swap_analysis(&t, limit).unwrap();
            let rec = payload_reconstruct_analysis(&t, vicinity, limit).unwrap();
            for s in [swap, rec] {
                prop_assert_eq!(s.payload_in, s.payload_out);
                prop_assert_eq!(s.packets_in, t.len() as u64);
                prop_assert_eq!(s.bytes_out, s.payload_out + 40 * s.packets_out);
                prop_assert!(s.packets_out * (limit as u64) >= s.bytes_out);
            }
            if fixed && limit == 1500 {
                prop_assert_eq!(swap.packet_ratio(), 2.0);
            }
            prop_assert!(rec.packets_out <= swap.packets_out);
        }
    }
}
