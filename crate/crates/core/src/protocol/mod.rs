//! Loss-tolerant state-sync protocol.
//!
//! Every [`Message`] is a full snapshot of one kind of client state, so receivers only
//! ever need the newest one per `(client, type)`. Messages travel as one or more
//! little-endian [`Datagram`]s that each fit under the MTU:
//!
//! ```text
//! offset  size  field
//!      0     2  magic, the bytes "GJ" (0x47 0x4A)
//!      2     1  version (1)
//!      3     1  msg_type
//!      4     2  client_id
//!      6     4  sequence
//!     10     2  frag_index
//!     12     2  frag_count
//!     14     2  payload_len
//!     16     …  payload fragment
//! ```
//!
//! Nothing is acknowledged or retransmitted. A message missing any fragment is discarded
//! whole, and a newer sequence for the same `(client, type)` evicts an unfinished older one.

mod codec;
mod hub;
mod payload;
mod reassembly;
mod scheduler;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{
    decode_bridge_frames, encode_bridge_frame, encode_message, Datagram, DEFAULT_MTU, HEADER_LEN,
    MAGIC, MAX_PAYLOAD, VERSION,
};
pub use hub::{Delivery, HubCounters, SessionHub};
pub use payload::{
    HighlightPayload, PosePayload, PresencePayload, TransformPayload, NO_HIGHLIGHT,
};
pub use reassembly::{decode_datagram, ReassemblyBuffer, ReassemblyCounters};
pub use scheduler::{FairScheduler, SendStats};
pub use store::{merge_state, sequence_newer, StateStore};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLarge(usize),
    #[error("mtu {0} leaves no room for payload (header is {HEADER_LEN} bytes)")]
    MtuTooSmall(usize),
    #[error("message needs {0} fragments, more than a u16 can count")]
    TooManyFragments(usize),
    #[error("datagram too short: {0} bytes")]
    Truncated(usize),
    #[error("bad magic {0:#06x}")]
    BadMagic(u16),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    BadType(u8),
    #[error("fragment {index} of {count} is out of range")]
    BadFragment { index: u16, count: u16 },
    #[error("payload_len {declared} does not match {actual} trailing bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("{kind} payload must be {expected} bytes, got {got}")]
    PayloadShape {
        kind: MsgType,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Pose = 1,
    Transform = 2,
    Highlight = 3,
    Presence = 4,
}

impl MsgType {
    pub const ALL: [MsgType; 4] = [
        MsgType::Pose,
        MsgType::Transform,
        MsgType::Highlight,
        MsgType::Presence,
    ];

    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(MsgType::Pose),
            2 => Some(MsgType::Transform),
            3 => Some(MsgType::Highlight),
            4 => Some(MsgType::Presence),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MsgType::Pose => "POSE",
            MsgType::Transform => "TRANSFORM",
            MsgType::Highlight => "HIGHLIGHT",
            MsgType::Presence => "PRESENCE",
        })
    }
}

/// One typed state snapshot from one client.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub msg_type: MsgType,
    pub client_id: u16,
    /// Per `(client, type)` counter, wrapping.
    pub sequence: u32,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(msg_type: MsgType, client_id: u16, sequence: u32, payload: Vec<u8>) -> Self {
        Message {
            msg_type,
            client_id,
            sequence,
            payload,
        }
    }

    pub fn key(&self) -> (u16, MsgType) {
        (self.client_id, self.msg_type)
    }
}

/// Per-type sequence counters for one sending client.
#[derive(Clone, Debug, Default)]
pub struct SequenceCounters {
    next: [u32; 4],
}

impl SequenceCounters {
    pub fn starting_at(seq: u32) -> Self {
        SequenceCounters { next: [seq; 4] }
    }

    pub fn next(&mut self, t: MsgType) -> u32 {
        let s = self.next[t.index()];
        self.next[t.index()] = s.wrapping_add(1);
        s
    }
}
