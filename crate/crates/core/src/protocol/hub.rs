//! Server-side fan-out: the multicast stand-in.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use serde::Serialize;

use super::{
    encode_message, Datagram, FairScheduler, MsgType, ReassemblyBuffer, SendStats, StateStore,
};

/// One datagram to hand to the transport.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery<A> {
    pub to: A,
    pub bytes: Arc<[u8]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HubCounters {
    pub received: u64,
    pub malformed: u64,
    pub unknown_client: u64,
    pub master_blocked: u64,
    pub forwarded: u64,
    pub deliveries: u64,
    pub joins: u64,
}

#[derive(Debug)]
struct Outbound {
    from_client: u16,
    bytes: Arc<[u8]>,
}

/// Relays every datagram from one session participant to all others, unmodified and
/// unacknowledged, while keeping a latest-wins copy of session state for late joiners.
///
/// `A` is the transport address (a socket address, a bridge connection id, a simulated node).
#[derive(Debug)]
pub struct SessionHub<A> {
    clients: BTreeMap<u16, A>,
    subscribers: Vec<A>,
    reassembly: ReassemblyBuffer,
    store: StateStore,
    scheduler: FairScheduler<Outbound>,
    mtu: usize,
    master_mode: bool,
    master: Option<u16>,
    auto_join: bool,
    counters: HubCounters,
}

impl<A: Clone + Eq + Debug> SessionHub<A> {
    pub fn new(mtu: usize) -> Self {
        SessionHub {
            clients: BTreeMap::new(),
            subscribers: Vec::new(),
            reassembly: ReassemblyBuffer::new(),
            store: StateStore::new(),
            scheduler: FairScheduler::new(),
            mtu,
            master_mode: false,
            master: None,
            auto_join: false,
            counters: HubCounters::default(),
        }
    }

    /// Only the master client's TRANSFORM messages are relayed. The first client to join
    /// becomes master unless one is set explicitly.
    pub fn with_master_mode(mut self, on: bool) -> Self {
        self.master_mode = on;
        self
    }

    /// Lets an unregistered client join by sending a PRESENCE datagram.
    pub fn with_auto_join(mut self, on: bool) -> Self {
        self.auto_join = on;
        self
    }

    pub fn set_master(&mut self, client: u16) {
        self.master = Some(client);
    }

    pub fn master(&self) -> Option<u16> {
        self.master
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn counters(&self) -> HubCounters {
        self.counters
    }

    pub fn send_stats(&self) -> &SendStats {
        self.scheduler.stats()
    }

    pub fn queued(&self) -> usize {
        self.scheduler.len()
    }

    pub fn clients(&self) -> impl Iterator<Item = (u16, &A)> {
        self.clients.iter().map(|(&c, a)| (c, a))
    }

    fn snapshot_for(&self, to: &A, exclude_client: Option<u16>) -> Vec<Delivery<A>> {
        self.store
            .iter()
            .filter(|m| Some(m.client_id) != exclude_client)
            .flat_map(|m| encode_message(m, self.mtu).unwrap_or_default())
            .map(|d| Delivery {
                to: to.clone(),
                bytes: d.encode().into(),
            })
            .collect()
    }

    /// Registers a client and returns the current session state for it to replay first.
    pub fn join(&mut self, client: u16, addr: A) -> Vec<Delivery<A>> {
        self.clients.insert(client, addr.clone());
        self.counters.joins += 1;
        if self.master_mode && self.master.is_none() {
            self.master = Some(client);
        }
        let snap = self.snapshot_for(&addr, Some(client));
        self.counters.deliveries += snap.len() as u64;
        snap
    }

    pub fn leave(&mut self, client: u16) {
        self.clients.remove(&client);
        self.store.remove_client(client);
        if self.master == Some(client) {
            self.master = None;
        }
    }

    /// Adds a receive-only observer (e.g. a bridge connection) and returns its snapshot.
    pub fn subscribe(&mut self, addr: A) -> Vec<Delivery<A>> {
        if !self.subscribers.contains(&addr) {
            self.subscribers.push(addr.clone());
        }
        let snap = self.snapshot_for(&addr, None);
        self.counters.deliveries += snap.len() as u64;
        snap
    }

    /// Drops an observer and any client registered at the same address.
    pub fn unsubscribe(&mut self, addr: &A) {
        self.subscribers.retain(|a| a != addr);
        let gone: Vec<u16> = self
            .clients
            .iter()
            .filter(|(_, a)| *a == addr)
            .map(|(&c, _)| c)
            .collect();
        for c in gone {
            self.leave(c);
        }
    }

    /// Accepts one datagram. Valid ones are queued for relay; the return value holds any
    /// snapshot owed to a client that joined through this datagram.
    pub fn receive(&mut self, from: &A, bytes: &[u8]) -> Vec<Delivery<A>> {
        self.counters.received += 1;
        let d = match Datagram::decode(bytes) {
            Ok(d) => d,
            Err(_) => {
                self.counters.malformed += 1;
                return Vec::new();
            }
        };
        let mut immediate = Vec::new();
        match self.clients.get(&d.client_id) {
            Some(a) if a == from => {}
            None if self.auto_join && d.msg_type == MsgType::Presence => {
                immediate = self.join(d.client_id, from.clone());
            }
            _ => {
                self.counters.unknown_client += 1;
                return Vec::new();
            }
        }
        if self.master_mode
            && d.msg_type == MsgType::Transform
            && self.master != Some(d.client_id)
        {
            self.counters.master_blocked += 1;
            return immediate;
        }
        let (t, from_client) = (d.msg_type, d.client_id);
        if let Some(m) = self.reassembly.push(d) {
            self.store.merge(m);
        }
        self.scheduler.push(
            t,
            Outbound {
                from_client,
                bytes: bytes.into(),
            },
        );
        immediate
    }

    /// Relays the next queued datagram (fairly across types) to everyone but its sender.
    pub fn poll_send(&mut self) -> Option<Vec<Delivery<A>>> {
        let (_, out) = self.scheduler.next_to_send()?;
        let sender_addr = self.clients.get(&out.from_client).cloned();
        let mut targets: Vec<A> = Vec::new();
        for (&c, a) in &self.clients {
            if c != out.from_client && Some(a) != sender_addr.as_ref() && !targets.contains(a) {
                targets.push(a.clone());
            }
        }
        for a in &self.subscribers {
            if Some(a) != sender_addr.as_ref() && !targets.contains(a) {
                targets.push(a.clone());
            }
        }
        self.counters.forwarded += 1;
        self.counters.deliveries += targets.len() as u64;
        Some(
            targets
                .into_iter()
                .map(|to| Delivery {
                    to,
                    bytes: out.bytes.clone(),
                })
                .collect(),
        )
    }

    /// Relays up to `budget` queued datagrams (all of them for `None`).
    pub fn drain(&mut self, budget: Option<usize>) -> Vec<Delivery<A>> {
        let mut out = Vec::new();
        let mut n = 0;
        while budget.is_none_or(|b| n < b) {
            match self.poll_send() {
                Some(d) => out.extend(d),
                None => break,
            }
            n += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{decode_datagram, Message, TransformPayload, DEFAULT_MTU};
    use super::*;

    fn transform(client: u16, seq: u32, x: f32) -> Message {
        Message::new(
            MsgType::Transform,
            client,
            seq,
            TransformPayload {
                translation: [x, 0.0, 0.0],
                scale: 1.0,
            }
            .encode(),
        )
    }

    fn wire(m: &Message) -> Vec<Vec<u8>> {
        encode_message(m, DEFAULT_MTU)
            .unwrap()
            .iter()
            .map(Datagram::encode)
            .collect()
    }

    #[test]
    fn fan_out_reaches_every_other_client_once() {
        let mut hub = SessionHub::new(DEFAULT_MTU);
        for c in 1..=3u16 {
            hub.join(c, c as u32 * 10);
        }
        for d in wire(&transform(1, 0, 1.0)) {
            hub.receive(&10, &d);
        }
        let out = hub.drain(None);
        let mut to: Vec<u32> = out.iter().map(|d| d.to).collect();
        to.sort();
        assert_eq!(to, vec![20, 30]);
        assert!(out.iter().all(|d| &d.bytes[..] == wire(&transform(1, 0, 1.0))[0].as_slice()));
    }

    #[test]
    fn unknown_or_spoofed_client_dropped() {
        let mut hub = SessionHub::new(DEFAULT_MTU);
        hub.join(1, 10u32);
        hub.join(2, 20u32);
        hub.receive(&99, &wire(&transform(5, 0, 1.0))[0]);
        hub.receive(&99, &wire(&transform(1, 0, 1.0))[0]);
        assert_eq!(hub.counters().unknown_client, 2);
        assert!(hub.drain(None).is_empty());
        hub.receive(&10, b"garbage");
        assert_eq!(hub.counters().malformed, 1);
    }

    #[test]
    fn late_joiner_gets_snapshot_first() {
        let mut hub = SessionHub::new(DEFAULT_MTU);
        hub.join(1, 10u32);
        for seq in 0..3 {
            hub.receive(&10, &wire(&transform(1, seq, seq as f32))[0]);
        }
        hub.drain(None);
        let snap = hub.join(2, 20u32);
        assert_eq!(snap.len(), 1);
        let mut r = ReassemblyBuffer::new();
        let m = decode_datagram(&snap[0].bytes, &mut r).unwrap();
        assert_eq!(m, transform(1, 2, 2.0));
    }

    #[test]
    fn master_mode_blocks_other_transforms() {
        let mut hub = SessionHub::new(DEFAULT_MTU).with_master_mode(true);
        hub.join(1, 10u32);
        hub.join(2, 20u32);
        assert_eq!(hub.master(), Some(1));
        hub.receive(&20, &wire(&transform(2, 0, 5.0))[0]);
        assert!(hub.drain(None).is_empty());
        assert_eq!(hub.counters().master_blocked, 1);
        hub.receive(&10, &wire(&transform(1, 0, 5.0))[0]);
        let out = hub.drain(None);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, 20);
        // Non-transform traffic from other clients still flows.
        let hl = Message::new(MsgType::Highlight, 2, 0, vec![1, 0, 0, 0]);
        hub.receive(&20, &wire(&hl)[0]);
        assert_eq!(hub.drain(None).len(), 1);
    }

    #[test]
    fn presence_auto_joins() {
        let mut hub = SessionHub::new(DEFAULT_MTU).with_auto_join(true);
        hub.join(1, 10u32);
        hub.receive(&10, &wire(&transform(1, 0, 3.0))[0]);
        hub.drain(None);
        let hello = Message::new(MsgType::Presence, 7, 0, vec![0; 28]);
        let snap = hub.receive(&70, &wire(&hello)[0]);
        assert_eq!(snap.len(), 1);
        assert_eq!(hub.clients().count(), 2);
        let out = hub.drain(None);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, 10);
    }

    #[test]
    fn subscribers_see_everything() {
        let mut hub = SessionHub::new(DEFAULT_MTU);
        hub.join(1, 10u32);
        hub.subscribe(99);
        hub.receive(&10, &wire(&transform(1, 0, 1.0))[0]);
        let out = hub.drain(None);
        assert_eq!(out.iter().map(|d| d.to).collect::<Vec<_>>(), vec![99]);
        hub.unsubscribe(&99);
        hub.receive(&10, &wire(&transform(1, 1, 1.0))[0]);
        assert!(hub.drain(None).is_empty());
    }
}
