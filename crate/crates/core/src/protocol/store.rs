use std::collections::BTreeMap;

use super::{Message, MsgType};

/// Wrap-aware ordering: `b` is newer than `a` iff `0 < (b − a) mod 2³² < 2³¹`.
pub fn sequence_newer(b: u32, a: u32) -> bool {
    let d = b.wrapping_sub(a);
    d != 0 && d < 1 << 31
}

/// Latest message per `(client, type)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateStore {
    entries: BTreeMap<(u16, MsgType), Message>,
}

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `m` if it is newer than what is held for its key. Returns whether it was kept.
    pub fn merge(&mut self, m: Message) -> bool {
        match self.entries.get(&m.key()) {
            Some(cur) if !sequence_newer(m.sequence, cur.sequence) => false,
            _ => {
                self.entries.insert(m.key(), m);
                true
            }
        }
    }

    pub fn get(&self, client: u16, t: MsgType) -> Option<&Message> {
        self.entries.get(&(client, t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.entries.values()
    }

    pub fn remove_client(&mut self, client: u16) {
        self.entries.retain(|k, _| k.0 != client);
    }

    /// Same keys and payloads, ignoring sequence numbers.
    pub fn same_state(&self, other: &StateStore) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .all(|(k, m)| other.entries.get(k).is_some_and(|o| o.payload == m.payload))
    }
}

/// Functional form of [`StateStore::merge`].
pub fn merge_state(mut store: StateStore, m: Message) -> StateStore {
    store.merge(m);
    store
}
