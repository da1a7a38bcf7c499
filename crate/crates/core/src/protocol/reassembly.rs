use std::collections::HashMap;

use super::store::sequence_newer;
use super::{Datagram, Message, MsgType};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReassemblyCounters {
    pub malformed: u64,
    pub delivered: u64,
    /// Incomplete messages thrown away because a newer sequence started.
    pub evicted: u64,
    /// Fragments of a sequence older than the one being assembled.
    pub stale_fragments: u64,
    pub duplicate_fragments: u64,
    /// Fragments whose `frag_count` disagrees with earlier fragments of the same message.
    pub inconsistent: u64,
}

#[derive(Debug)]
struct Pending {
    sequence: u32,
    parts: Vec<Option<Vec<u8>>>,
    received: usize,
}

/// Collects fragments per `(client, type)`. Only one message per key is ever in flight;
/// nothing partial is ever delivered.
#[derive(Debug, Default)]
pub struct ReassemblyBuffer {
    pending: HashMap<(u16, MsgType), Pending>,
    pub counters: ReassemblyCounters,
}

impl ReassemblyBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Feeds one already-parsed datagram.
    pub fn push(&mut self, d: Datagram) -> Option<Message> {
        let key = (d.client_id, d.msg_type);
        if d.frag_count == 1 {
            // A complete newer message supersedes any unfinished older one.
            if let Some(p) = self.pending.get(&key) {
                if sequence_newer(d.sequence, p.sequence) {
                    self.pending.remove(&key);
                    self.counters.evicted += 1;
                }
            }
            self.counters.delivered += 1;
            return Some(Message::new(d.msg_type, d.client_id, d.sequence, d.payload));
        }

        let count = d.frag_count as usize;
        let p = match self.pending.get_mut(&key) {
            Some(p) if p.sequence == d.sequence => p,
            Some(p) if !sequence_newer(d.sequence, p.sequence) => {
                self.counters.stale_fragments += 1;
                return None;
            }
            existing => {
                if existing.is_some() {
                    self.counters.evicted += 1;
                }
                self.pending.insert(
                    key,
                    Pending {
                        sequence: d.sequence,
                        parts: vec![None; count],
                        received: 0,
                    },
                );
                self.pending.get_mut(&key).unwrap()
            }
        };
        if p.parts.len() != count {
            self.counters.inconsistent += 1;
            return None;
        }
        let slot = &mut p.parts[d.frag_index as usize];
        if slot.is_some() {
            self.counters.duplicate_fragments += 1;
            return None;
        }
        *slot = Some(d.payload);
        p.received += 1;
        if p.received < count {
            return None;
        }
        let p = self.pending.remove(&key).unwrap();
        let payload = p.parts.into_iter().flatten().flatten().collect();
        self.counters.delivered += 1;
        Some(Message::new(d.msg_type, d.client_id, d.sequence, payload))
    }
}

/// Parses raw bytes and feeds them to the buffer. Malformed input is counted and dropped.
pub fn decode_datagram(bytes: &[u8], r: &mut ReassemblyBuffer) -> Option<Message> {
    match Datagram::decode(bytes) {
        Ok(d) => r.push(d),
        Err(_) => {
            r.counters.malformed += 1;
            None
        }
    }
}
