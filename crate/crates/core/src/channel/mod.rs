//! A simulated datagram channel that drops or reorders keyed packets, and
//! the Monte-Carlo efficiency experiments run over it.

mod experiment;

pub use experiment::{
    parse_experiment_config, run_experiment, Axis, BufferPolicy, CellResult, ExperimentGrid,
    ExperimentResults,
};

use rand::Rng;
use thiserror::Error;

use crate::keyed::{reconstruct, KeyedPacket, PayloadId, SlotValue, SraConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("displacement needs max_d >= 1")]
    InvalidDisplacement,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReorderModel {
    /// Scan left to right; with probability q swap a packet with its
    /// successor and skip the successor.
    #[default]
    AdjacentSwap,
    /// With probability q hold a packet back by 1..=max_d arrival slots.
    Displacement { max_d: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub loss_prob: f64,
    pub reorder_prob: f64,
    pub reorder_model: ReorderModel,
    pub rng_seed: u64,
}

fn check_prob(p: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ChannelError::InvalidProbability(p))
    }
}

impl ChannelConfig {
    pub fn new(
        loss_prob: f64,
        reorder_prob: f64,
        reorder_model: ReorderModel,
        rng_seed: u64,
    ) -> Result<Self, ChannelError> {
        check_prob(loss_prob)?;
        check_prob(reorder_prob)?;
        if let ReorderModel::Displacement { max_d: 0 } = reorder_model {
            return Err(ChannelError::InvalidDisplacement);
        }
        Ok(ChannelConfig {
            loss_prob,
            reorder_prob,
            reorder_model,
            rng_seed,
        })
    }
}

/// `rounds` passes over a key of length `n`. Payload ids are the 1-based
/// send positions.
pub fn make_stream(n: usize, rounds: usize) -> Vec<KeyedPacket> {
    (0..n * rounds)
        .map(|i| KeyedPacket::new(i as u64 + 1, i % n))
        .collect()
}

/// Drops each packet independently with probability `p`. Returns the
/// survivors in order and the realized loss fraction.
pub fn apply_loss<R: Rng + ?Sized>(
    stream: &[KeyedPacket],
    p: f64,
    rng: &mut R,
) -> (Vec<KeyedPacket>, f64) {
    // one draw per packet regardless of p, so streams line up across rates
    let kept: Vec<KeyedPacket> = stream
        .iter()
        .copied()
        .filter(|_| rng.gen::<f64>() >= p)
        .collect();
    let rate = if stream.is_empty() {
        0.0
    } else {
        (stream.len() - kept.len()) as f64 / stream.len() as f64
    };
    (kept, rate)
}

/// Permutes the stream. Returns the arrival order and the fraction of
/// packets that arrive at a different index than they were sent.
pub fn apply_reorder<R: Rng + ?Sized>(
    stream: &[KeyedPacket],
    q: f64,
    model: ReorderModel,
    rng: &mut R,
) -> (Vec<KeyedPacket>, f64) {
    let mut out = stream.to_vec();
    match model {
        ReorderModel::AdjacentSwap => {
            let mut i = 0;
            while i + 1 < out.len() {
                if rng.gen::<f64>() < q {
                    out.swap(i, i + 1);
                    i += 2;
                } else {
                    i += 1;
                }
            }
        }
        ReorderModel::Displacement { max_d } => {
            // Delayed packet i sorts just after original slot i+d.
            let mut keyed: Vec<(usize, KeyedPacket)> = out
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    if rng.gen::<f64>() < q {
                        let d = rng.gen_range(1..=max_d.max(1));
                        (2 * (i + d) + 1, p)
                    } else {
                        (2 * i, p)
                    }
                })
                .collect();
            keyed.sort_by_key(|&(k, _)| k);
            out = keyed.into_iter().map(|(_, p)| p).collect();
        }
    }
    let moved = out.iter().zip(stream).filter(|(a, b)| a != b).count();
    let rate = if stream.is_empty() {
        0.0
    } else {
        moved as f64 / stream.len() as f64
    };
    (out, rate)
}

/// Ground truth for a trial: the packet where it was delivered, `f` where
/// it was lost.
pub fn reference_for(sent: &[KeyedPacket], delivered: &[KeyedPacket]) -> Vec<SlotValue> {
    let got: std::collections::HashSet<PayloadId> =
        delivered.iter().map(|p| p.payload_id).collect();
    sent.iter()
        .map(|p| {
            if got.contains(&p.payload_id) {
                SlotValue::Packet(p.payload_id)
            } else {
                SlotValue::Miss
            }
        })
        .collect()
}

/// Share of the `reference.len()` positions where the output agrees. The
/// output is padded with `f` or truncated to that length. An empty
/// reference scores 1.
pub fn efficiency(reference: &[SlotValue], output: &[SlotValue]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let hits = reference
        .iter()
        .enumerate()
        .filter(|&(i, r)| output.get(i).copied().unwrap_or(SlotValue::Miss) == *r)
        .count();
    hits as f64 / reference.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub key_len: usize,
    pub stream_len: usize,
    pub delivered: usize,
    pub realized_rate: f64,
    pub reference: Vec<SlotValue>,
    pub output: Vec<SlotValue>,
    pub efficiency: f64,
}

/// One stream of `rounds * n` packets through the channel and the SRA.
/// Loss and reorder are applied in that order; a grid sets only one of
/// them.
pub fn run_trial<R: Rng + ?Sized>(
    sra: SraConfig,
    rounds: usize,
    channel: &ChannelConfig,
    rng: &mut R,
) -> TrialResult {
    let n = sra.key_len();
    let sent = make_stream(n, rounds);
    let (mut arrived, mut rate) = (sent.clone(), 0.0);
    if channel.loss_prob > 0.0 {
        (arrived, rate) = apply_loss(&sent, channel.loss_prob, rng);
    }
    if channel.reorder_prob > 0.0 {
        let r;
        (arrived, r) = apply_reorder(&arrived, channel.reorder_prob, channel.reorder_model, rng);
        if channel.loss_prob == 0.0 {
            rate = r;
        }
    }
    let reference = reference_for(&sent, &arrived);
    let output = reconstruct(sra, arrived.iter().copied()).expect("indices from make_stream");
    TrialResult {
        key_len: n,
        stream_len: sent.len(),
        delivered: arrived.len(),
        realized_rate: rate,
        efficiency: efficiency(&reference, &output),
        reference,
        output,
    }
}
