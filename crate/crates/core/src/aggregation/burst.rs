use std::collections::BTreeMap;
use std::str::FromStr;

use super::trace::{HostAddr, PacketRecord, Trace};
use super::wire::{aggregate_packets, packet_bytes, Carrier};
use super::AggError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Trigger {
    SizeOnly,
    TimeOnly,
    #[default]
    Hybrid,
}

impl FromStr for Trigger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Trigger::SizeOnly),
            "time" => Ok(Trigger::TimeOnly),
            "hybrid" => Ok(Trigger::Hybrid),
            _ => Err(format!("unknown trigger {s:?} (size|time|hybrid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BurstPolicy {
    /// Upper bound on the summed total length of a burst's members.
    pub max_burst_payload: usize,
    pub max_delay_us: u64,
    pub trigger: Trigger,
}

impl Default for BurstPolicy {
    fn default() -> Self {
        BurstPolicy {
            max_burst_payload: 9_000,
            max_delay_us: 10_000,
            trigger: Trigger::Hybrid,
        }
    }
}

impl BurstPolicy {
    fn uses_size(&self) -> bool {
        matches!(self.trigger, Trigger::SizeOnly | Trigger::Hybrid)
    }

    fn uses_time(&self) -> bool {
        matches!(self.trigger, Trigger::TimeOnly | Trigger::Hybrid)
    }
}

/// Packets for one route, sent together behind one carrier header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Burst {
    pub route: HostAddr,
    pub members: Vec<PacketRecord>,
    /// When the queue was released.
    pub flush_ts_us: u64,
}

impl Burst {
    pub fn payload_len(&self) -> usize {
        self.members.iter().map(|m| m.total_len as usize).sum()
    }

    /// Member packets serialized back to back.
    pub fn member_bytes(&self) -> Vec<Vec<u8>> {
        self.members.iter().map(packet_bytes).collect()
    }

    /// Longest time any member sat in the queue.
    pub fn max_wait_us(&self) -> u64 {
        self.members
            .first()
            .map_or(0, |m| self.flush_ts_us - m.ts_us)
    }
}

pub fn aggregate_burst(burst: &Burst, carrier: &Carrier) -> Result<Vec<u8>, AggError> {
    aggregate_packets(&burst.member_bytes(), carrier)
}

#[derive(Default)]
struct Queue {
    members: Vec<PacketRecord>,
    bytes: usize,
}

/// Per-destination queues released on the size trigger (the next packet
/// would push the queue past `max_burst_payload`), the time trigger (the
/// oldest packet has waited `max_delay_us`), or whichever comes first.
/// Bursts come out ordered by release time, then route.
pub fn assemble_bursts(trace: &Trace, policy: &BurstPolicy) -> Result<Vec<Burst>, AggError> {
    let mut queues: BTreeMap<HostAddr, Queue> = BTreeMap::new();
    let mut out: Vec<Burst> = Vec::new();
    let release = |route: &HostAddr, q: &mut Queue, at: u64, out: &mut Vec<Burst>| {
        q.bytes = 0;
        out.push(Burst {
            route: route.clone(),
            members: std::mem::take(&mut q.members),
            flush_ts_us: at,
        });
    };
    let deadline = |q: &Queue| q.members.first().map(|m| m.ts_us + policy.max_delay_us);

    for (i, p) in trace.records().iter().enumerate() {
        let len = p.total_len as usize;
        if policy.uses_size() && len > policy.max_burst_payload {
            return Err(AggError::PacketTooLarge {
                index: i,
                total_len: p.total_len,
                max: policy.max_burst_payload,
            });
        }
        if policy.uses_time() {
            for (route, q) in queues.iter_mut() {
                if let Some(d) = deadline(q).filter(|&d| d <= p.ts_us) {
                    release(route, q, d, &mut out);
                }
            }
        }
        let q = queues.entry(p.dst.clone()).or_default();
        if policy.uses_size() && q.bytes + len > policy.max_burst_payload {
            release(&p.dst, q, p.ts_us, &mut out);
        }
        q.bytes += len;
        q.members.push(p.clone());
    }
    let end = trace.records().last().map_or(0, |r| r.ts_us);
    for (route, q) in queues.iter_mut() {
        if q.members.is_empty() {
            continue;
        }
        let at = if policy.uses_time() {
            deadline(q).expect("non-empty")
        } else {
            end
        };
        release(route, q, at, &mut out);
    }
    // stable: bursts of one route keep their order
    out.sort_by(|a, b| (a.flush_ts_us, &a.route).cmp(&(b.flush_ts_us, &b.route)));
    Ok(out)
}
