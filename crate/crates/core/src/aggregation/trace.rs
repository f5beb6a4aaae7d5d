use std::fmt;
use std::io;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AggError;
use crate::addr::{V4Address, V6Address};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IpVersion {
    V4,
    V6,
}

impl IpVersion {
    pub fn header_len(self) -> u32 {
        match self {
            IpVersion::V4 => 20,
            IpVersion::V6 => 40,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            IpVersion::V4 => 4,
            IpVersion::V6 => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HostAddr {
    V4(V4Address),
    V6(V6Address),
}

impl HostAddr {
    pub fn version(&self) -> IpVersion {
        match self {
            HostAddr::V4(_) => IpVersion::V4,
            HostAddr::V6(_) => IpVersion::V6,
        }
    }
}

impl fmt::Display for HostAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostAddr::V4(a) => a.fmt(f),
            HostAddr::V6(a) => a.fmt(f),
        }
    }
}

impl FromStr for HostAddr {
    type Err = crate::addr::AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            s.parse().map(HostAddr::V6)
        } else {
            s.parse().map(HostAddr::V4)
        }
    }
}

/// Header fields of one captured packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketRecord {
    pub ts_us: u64,
    pub src: HostAddr,
    pub dst: HostAddr,
    pub sport: u16,
    pub dport: u16,
    /// Bytes including the IP header.
    pub total_len: u32,
}

impl PacketRecord {
    pub fn new(
        ts_us: u64,
        src: HostAddr,
        dst: HostAddr,
        sport: u16,
        dport: u16,
        total_len: u32,
    ) -> Result<Self, AggError> {
        let bad = |reason: String| Err(AggError::InvalidRecord(reason));
        if src.version() != dst.version() {
            return bad(format!("{src} and {dst} are different IP versions"));
        }
        let v = src.version();
        if total_len < v.header_len() {
            return bad(format!(
                "total_len {total_len} shorter than the IPv{} header",
                v.number()
            ));
        }
        let max = match v {
            IpVersion::V4 => 65_535,
            IpVersion::V6 => 65_535 + 40,
        };
        if total_len > max {
            return bad(format!("total_len {total_len} exceeds {max}"));
        }
        Ok(PacketRecord {
            ts_us,
            src,
            dst,
            sport,
            dport,
            total_len,
        })
    }

    pub fn version(&self) -> IpVersion {
        self.src.version()
    }

    /// Bytes after the base header.
    pub fn payload_len(&self) -> u32 {
        self.total_len - self.version().header_len()
    }
}

/// Packet records in non-decreasing timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    records: Vec<PacketRecord>,
}

const CSV_HEADER: [&str; 7] = [
    "ts_us",
    "ip_version",
    "src",
    "dst",
    "sport",
    "dport",
    "total_len",
];

impl Trace {
    pub fn new(records: Vec<PacketRecord>) -> Result<Self, AggError> {
        if let Some(i) = records.windows(2).position(|w| w[1].ts_us < w[0].ts_us) {
            return Err(AggError::NonMonotone { index: i + 1 });
        }
        Ok(Trace { records })
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), AggError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.ts_us.to_string(),
                r.version().number().to_string(),
                r.src.to_string(),
                r.dst.to_string(),
                r.sport.to_string(),
                r.dport.to_string(),
                r.total_len.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, AggError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(AggError::InvalidRecord(format!(
                "expected header {}",
                CSV_HEADER.join(",")
            )));
        }
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let bad = |what: &str| AggError::InvalidRecord(format!("line {line}: bad {what}"));
            let num = |idx: usize, what: &str| -> Result<u64, AggError> {
                row[idx].parse().map_err(|_| bad(what))
            };
            let ts_us = num(0, "ts_us")?;
            let version = num(1, "ip_version")?;
            let src: HostAddr = row[2].parse().map_err(|_| bad("src"))?;
            let dst: HostAddr = row[3].parse().map_err(|_| bad("dst"))?;
            if version != src.version().number() as u64 {
                return Err(bad("ip_version"));
            }
            let port = |idx, what| u16::try_from(num(idx, what)?).map_err(|_| bad(what));
            let (sport, dport) = (port(4, "sport")?, port(5, "dport")?);
            let total_len = u32::try_from(num(6, "total_len")?).map_err(|_| bad("total_len"))?;
            let rec = PacketRecord::new(ts_us, src, dst, sport, dport, total_len)
                .map_err(|e| AggError::InvalidRecord(format!("line {line}: {e}")))?;
            records.push(rec);
        }
        Trace::new(records)
    }
}

/// Packet sizes (total length) with relative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDist {
    pub sizes: Vec<(u32, f64)>,
}

impl SizeDist {
    pub fn fixed(size: u32) -> Self {
        SizeDist {
            sizes: vec![(size, 1.0)],
        }
    }

    /// Small acks, mid-size and full-MTU packets, with most of the mass
    /// at 1500 bytes.
    pub fn internet_mix() -> Self {
        SizeDist {
            sizes: vec![(40, 0.35), (576, 0.15), (1200, 0.05), (1500, 0.45)],
        }
    }
}

/// Parameters of a synthetic bursty trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProfile {
    pub flows: usize,
    /// Distinct destination hosts; flow `f` goes to destination `f % destinations`.
    pub destinations: usize,
    pub packets: usize,
    /// Stop early once timestamps pass this point.
    pub duration_us: Option<u64>,
    /// Average number of consecutive packets from one flow.
    pub mean_train: f64,
    /// Gap between packets inside a train.
    pub intra_gap_us: u64,
    /// Mean of the exponential gap when the link switches flow.
    pub mean_switch_gap_us: f64,
    pub sizes: SizeDist,
    pub version: IpVersion,
    pub seed: u64,
}

impl Default for TraceProfile {
    fn default() -> Self {
        TraceProfile {
            flows: 32,
            destinations: 4,
            packets: 10_000,
            duration_us: None,
            mean_train: 8.0,
            intra_gap_us: 12,
            mean_switch_gap_us: 150.0,
            sizes: SizeDist::internet_mix(),
            version: IpVersion::V4,
            seed: 0,
        }
    }
}

fn flow_endpoints(f: usize, dests: usize, v: IpVersion) -> (HostAddr, HostAddr) {
    let d = f % dests;
    match v {
        IpVersion::V4 => (
            HostAddr::V4(V4Address::new(0x0A01_0000 | f as u32 & 0xFFFF)),
            HostAddr::V4(V4Address::new(0xC0A8_0000 | d as u32 & 0xFFFF)),
        ),
        IpVersion::V6 => (
            HostAddr::V6(V6Address::new((0x2001_0db8_0001u128 << 80) | f as u128)),
            HostAddr::V6(V6Address::new((0x2001_0db8_0002u128 << 80) | d as u128)),
        ),
    }
}

/// Deterministic synthetic trace: the link carries trains of packets
/// from one flow at a time, switching flow with probability
/// `1 / mean_train` after each packet.
pub fn generate_trace(profile: &TraceProfile) -> Result<Trace, AggError> {
    let bad = |s: &str| Err(AggError::InvalidProfile(s.into()));
    if profile.flows == 0 || profile.destinations == 0 {
        return bad("flows and destinations must be at least 1");
    }
    if profile.mean_train < 1.0 || profile.mean_switch_gap_us < 0.0 {
        return bad("mean_train must be >= 1 and gaps non-negative");
    }
    let min = profile.version.header_len();
    if profile
        .sizes
        .sizes
        .iter()
        .any(|&(s, _)| s < min || s > 65_535)
    {
        return bad("packet sizes must fit between the header size and 65535");
    }
    let weights = WeightedIndex::new(profile.sizes.sizes.iter().map(|s| s.1))
        .map_err(|e| AggError::InvalidProfile(format!("size weights: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let switch_p = 1.0 / profile.mean_train;
    let mut records = Vec::with_capacity(profile.packets);
    let mut ts = 0u64;
    let mut flow = 0usize;
    for i in 0..profile.packets {
        if i > 0 {
            if rng.gen::<f64>() < switch_p {
                flow = rng.gen_range(0..profile.flows);
                // inverse-CDF exponential
                let u: f64 = rng.gen();
                ts += (-(1.0 - u).ln() * profile.mean_switch_gap_us).round() as u64;
            } else {
                ts += profile.intra_gap_us;
            }
        }
        if profile.duration_us.is_some_and(|d| ts > d) {
            break;
        }
        let size = profile.sizes.sizes[weights.sample(&mut rng)].0;
        let (src, dst) = flow_endpoints(flow, profile.destinations, profile.version);
        let sport = 20_000 + (flow % 40_000) as u16;
        let dport = 5_000 + (flow % 7) as u16;
        records.push(PacketRecord::new(ts, src, dst, sport, dport, size)?);
    }
    Trace::new(records)
}
