use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SraError {
    #[error("key length must be at least 2, got {0}")]
    KeyTooShort(usize),
    #[error("buffer length must be at least 1")]
    EmptyBuffer,
    #[error("key index {index} out of range for key length {key_len}")]
    KeyIndexOutOfRange { index: usize, key_len: usize },
    #[error("state already flushed")]
    Flushed,
}

/// Stands in for the application payload of one datagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PayloadId(pub u64);

impl fmt::Display for PayloadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyedPacket {
    pub payload_id: PayloadId,
    /// Position of the observed key value within the key.
    pub key_index: usize,
}

impl KeyedPacket {
    pub fn new(payload_id: u64, key_index: usize) -> Self {
        KeyedPacket {
            payload_id: PayloadId(payload_id),
            key_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotValue {
    Packet(PayloadId),
    /// Nothing received for this position, written `f`.
    Miss,
}

impl SlotValue {
    pub fn is_miss(&self) -> bool {
        matches!(self, SlotValue::Miss)
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Packet(id) => write!(f, "{id}"),
            SlotValue::Miss => f.write_str("f"),
        }
    }
}

/// One elected position; displays as `position,payload_id` or
/// `position,f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElectionEvent {
    pub position: u64,
    pub value: SlotValue,
}

impl fmt::Display for ElectionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.position, self.value)
    }
}

/// One line per event, newline-terminated.
pub fn format_events(events: &[ElectionEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SraConfig {
    key_len: usize,
    buffer_len: usize,
    miss_quorum: Option<usize>,
}

impl SraConfig {
    /// Buffer of ⌈n/2⌉ packets.
    pub fn new(key_len: usize) -> Result<Self, SraError> {
        if key_len < 2 {
            return Err(SraError::KeyTooShort(key_len));
        }
        Ok(SraConfig {
            key_len,
            buffer_len: key_len.div_ceil(2),
            miss_quorum: None,
        })
    }

    /// Buffer of n−1 packets.
    pub fn full_buffer(key_len: usize) -> Result<Self, SraError> {
        let c = SraConfig::new(key_len)?;
        c.with_buffer_len(key_len - 1)
    }

    pub fn with_buffer_len(mut self, buffer_len: usize) -> Result<Self, SraError> {
        if buffer_len == 0 {
            return Err(SraError::EmptyBuffer);
        }
        self.buffer_len = buffer_len;
        Ok(self)
    }

    /// Minimum number of a queue's packets that must lie beyond a
    /// position before that queue may vote `f` for it.
    pub fn with_miss_quorum(mut self, quorum: usize) -> Self {
        self.miss_quorum = Some(quorum.max(1));
        self
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer_len
    }

    /// Defaults to 2 for buffers of at most two packets and 1 otherwise.
    /// With so few packets buffered, a single queue built between a swapped
    /// pair would otherwise vote the earlier position missing and win the
    /// tie.
    pub fn miss_quorum(&self) -> usize {
        self.miss_quorum
            .unwrap_or(if self.buffer_len <= 2 { 2 } else { 1 })
    }
}

/// A snapshot of every unelected packet, each placed in the first free
/// slot of its key residue at or after the head.
#[derive(Debug, Clone)]
struct SortingQueue {
    head: u64,
    end: u64,
    // sorted by position
    slots: Vec<(u64, PayloadId)>,
}

impl SortingQueue {
    fn covers(&self, pos: u64) -> bool {
        self.head <= pos && pos <= self.end
    }

    fn at(&self, pos: u64) -> Option<PayloadId> {
        self.slots
            .binary_search_by_key(&pos, |&(p, _)| p)
            .ok()
            .map(|i| self.slots[i].1)
    }

    fn beyond(&self, pos: u64) -> usize {
        self.slots.len() - self.slots.partition_point(|&(p, _)| p <= pos)
    }
}

/// Majority vote over candidates listed in queue order, oldest first.
/// Ties go to the value whose first vote came earliest; no candidates
/// elects `f`.
pub fn elect(candidates: impl IntoIterator<Item = SlotValue>) -> SlotValue {
    // (value, count, first index)
    let mut tally: Vec<(SlotValue, usize, usize)> = Vec::new();
    for (i, c) in candidates.into_iter().enumerate() {
        match tally.iter_mut().find(|t| t.0 == c) {
            Some(t) => t.1 += 1,
            None => tally.push((c, 1, i)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map_or(SlotValue::Miss, |t| t.0)
}

/// Receiver-side stream reconstruction.
///
/// Arriving packets are buffered. Whenever `buffer_len` packets are
/// pending, a new sorting queue is built and position `j` is elected by
/// the last n+1 queues. A packet wins at most once; its id leaves the
/// buffer when it does.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    config: SraConfig,
    pending: Vec<KeyedPacket>,
    queues: VecDeque<SortingQueue>,
    elected: HashSet<PayloadId>,
    output: Vec<SlotValue>,
    next: u64,
    flushed: bool,
    // scratch for queue building, one counter per key index
    placed: Vec<u64>,
}

impl ReconstructionState {
    pub fn new(config: SraConfig) -> Self {
        ReconstructionState {
            config,
            pending: Vec::with_capacity(config.buffer_len + 1),
            queues: VecDeque::with_capacity(config.key_len + 2),
            elected: HashSet::new(),
            output: Vec::new(),
            next: 1,
            flushed: false,
            placed: vec![0; config.key_len],
        }
    }

    pub fn config(&self) -> &SraConfig {
        &self.config
    }

    /// Elected values so far; index 0 is position 1.
    pub fn output(&self) -> &[SlotValue] {
        &self.output
    }

    /// Next position to be elected.
    pub fn next_position(&self) -> u64 {
        self.next
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_flushed(&self) -> bool {
        self.flushed
    }

    fn first_slot(&self, key_index: usize) -> u64 {
        let n = self.config.key_len as u64;
        let j = self.next;
        j + (key_index as u64 + n - (j - 1) % n) % n
    }

    /// Position a packet with `key_index` would take if a queue were built
    /// now: the first slot of its residue at or after the next position,
    /// moved on by one round for each pending packet already holding that
    /// residue.
    pub fn infer_position(&self, key_index: usize) -> Result<u64, SraError> {
        self.check_index(key_index)?;
        let n = self.config.key_len as u64;
        let taken = self
            .pending
            .iter()
            .filter(|p| p.key_index == key_index)
            .count() as u64;
        Ok(self.first_slot(key_index) + n * taken)
    }

    fn check_index(&self, index: usize) -> Result<(), SraError> {
        if index >= self.config.key_len {
            return Err(SraError::KeyIndexOutOfRange {
                index,
                key_len: self.config.key_len,
            });
        }
        Ok(())
    }

    /// Buffers one arrival and runs every election that becomes due.
    pub fn push(&mut self, packet: KeyedPacket) -> Result<Vec<ElectionEvent>, SraError> {
        if self.flushed {
            return Err(SraError::Flushed);
        }
        self.check_index(packet.key_index)?;
        self.pending.push(packet);
        let mut events = Vec::new();
        while self.pending.len() >= self.config.buffer_len {
            events.push(self.step());
        }
        Ok(events)
    }

    /// End of input: elects until every buffered packet has been placed.
    /// Positions after the last received packet are not guessed; see
    /// [`ReconstructionState::flush_through`].
    pub fn flush(&mut self) -> Vec<ElectionEvent> {
        let mut events = Vec::new();
        while !self.pending.is_empty() {
            events.push(self.step());
        }
        self.flushed = true;
        events
    }

    /// Like [`ReconstructionState::flush`], then pads with `f` up to
    /// `last_position` when the stream length is known.
    pub fn flush_through(&mut self, last_position: u64) -> Vec<ElectionEvent> {
        let mut events = self.flush();
        while self.next <= last_position {
            events.push(self.record(SlotValue::Miss));
        }
        events
    }

    /// Current votes for `position` from the retained queues, oldest queue
    /// first. Already elected packets and queues without enough evidence
    /// to call the position missing abstain.
    pub fn candidates(&self, position: u64) -> Vec<SlotValue> {
        let quorum = self.config.miss_quorum();
        self.queues
            .iter()
            .filter(|q| q.covers(position))
            .filter_map(|q| match q.at(position) {
                Some(id) if self.elected.contains(&id) => None,
                Some(id) => Some(SlotValue::Packet(id)),
                None if q.beyond(position) >= quorum => Some(SlotValue::Miss),
                None => None,
            })
            .collect()
    }

    fn build_queue(&mut self) {
        let n = self.config.key_len as u64;
        self.placed.fill(0);
        let mut slots = Vec::with_capacity(self.pending.len());
        for i in 0..self.pending.len() {
            let p = self.pending[i];
            let pos = self.first_slot(p.key_index) + n * self.placed[p.key_index];
            self.placed[p.key_index] += 1;
            slots.push((pos, p.payload_id));
        }
        slots.sort_unstable_by_key(|&(pos, _)| pos);
        let end = slots.last().map_or(self.next - 1, |&(pos, _)| pos);
        if self.queues.len() == self.config.key_len + 1 {
            self.queues.pop_front();
        }
        self.queues.push_back(SortingQueue {
            head: self.next,
            end,
            slots,
        });
    }

    fn step(&mut self) -> ElectionEvent {
        self.build_queue();
        let winner = elect(self.candidates(self.next));
        if let SlotValue::Packet(id) = winner {
            self.elected.insert(id);
            if let Some(i) = self.pending.iter().position(|p| p.payload_id == id) {
                self.pending.remove(i);
            }
        }
        self.record(winner)
    }

    fn record(&mut self, value: SlotValue) -> ElectionEvent {
        let ev = ElectionEvent {
            position: self.next,
            value,
        };
        self.output.push(value);
        self.next += 1;
        ev
    }
}

/// Feeds `arrivals` through a fresh state and flushes.
pub fn reconstruct(
    config: SraConfig,
    arrivals: impl IntoIterator<Item = KeyedPacket>,
) -> Result<Vec<SlotValue>, SraError> {
    let mut st = ReconstructionState::new(config);
    for p in arrivals {
        st.push(p)?;
    }
    st.flush();
    Ok(st.output)
}
