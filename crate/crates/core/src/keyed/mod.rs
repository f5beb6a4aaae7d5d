//! Keyed transport: round-robin keys over ports or IPv6 addresses, and
//! receiver-side stream reconstruction.

mod key;
mod sra;

pub use key::{Key, KeyError, KeyMode, KeyPoint, KeyValue};
pub use sra::{
    elect, format_events, reconstruct, ElectionEvent, KeyedPacket, PayloadId, ReconstructionState,
    SlotValue, SraConfig, SraError,
};
