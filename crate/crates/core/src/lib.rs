//! Address arithmetic, VLSM planning, keyed-transport stream
//! reconstruction with a simulated lossy channel, and IP packet
//! aggregation.

pub mod addr;
pub mod aggregation;
pub mod channel;
pub mod keyed;
pub mod subnet;
