//! Packet traces, IP-PAC burst assembly and carriers, and IPv4 to IPv6
//! remanufacturing analyses.

mod burst;
mod remanufacture;
mod trace;
mod wire;

pub use burst::{aggregate_burst, assemble_bursts, Burst, BurstPolicy, Trigger};
pub use remanufacture::{
    header_swap_analysis, payload_reconstruct_analysis, remanufacture_sweep, segment, stats_csv,
    ConversionStats, SweepRow, SIZE_LIMITS, VICINITIES_US,
};
pub use trace::{generate_trace, HostAddr, IpVersion, PacketRecord, SizeDist, Trace, TraceProfile};
pub use wire::{
    aggregate_packets, disaggregate, internet_checksum, packet_bytes, Carrier, CARRIER_PROTOCOL,
    MAX_V4_CARRIER_PAYLOAD,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggError {
    #[error("invalid packet record: {0}")]
    InvalidRecord(String),
    #[error("timestamp at record {index} goes backwards")]
    NonMonotone { index: usize },
    #[error("invalid trace profile: {0}")]
    InvalidProfile(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
    #[error("carrier payload of {payload} bytes exceeds {max}")]
    Overflow { payload: usize, max: usize },
    #[error("bad carrier: {0}")]
    BadCarrier(String),
    #[error("carrier payload is truncated")]
    TruncatedPayload,
    #[error("bad inner header at payload offset {offset}")]
    BadInnerHeader { offset: usize },
    #[error("packet {index} is {total_len} bytes, over the burst limit of {max}")]
    PacketTooLarge {
        index: usize,
        total_len: u32,
        max: usize,
    },
    #[error("packet {index} is not IPv4")]
    NotIpv4 { index: usize },
    #[error("size limit {0} leaves no room for an IPv6 header")]
    InvalidLimit(u32),
}

impl From<csv::Error> for AggError {
    fn from(e: csv::Error) -> Self {
        AggError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for AggError {
    fn from(e: std::io::Error) -> Self {
        AggError::Io(e.to_string())
    }
}
