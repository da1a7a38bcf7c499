//! Discrete-event simulation of a shared session over a lossy network.
//!
//! Clients run [`ClientSession`] on scripted hand frames at a fixed tick. Every datagram goes
//! through a [`NetworkModel`] to the [`SessionHub`] and from there to the other clients, which
//! reassemble and merge into their own [`StateStore`]. Time is virtual and all randomness
//! comes from the model seed, so a scenario always produces the same [`SimMetrics`].
//!
//! Alongside the state-based receivers, every client also keeps an event-based strawman that
//! applies each received TRANSFORM as a delta from the sender's previous one.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::interaction::{ClientSession, GraphTransform, HandFrame, PoseCode, RemoteView};
use crate::protocol::{
    encode_message, Datagram, MsgType, ReassemblyBuffer, SessionHub, StateStore,
    TransformPayload, DEFAULT_MTU,
};

/// Default frame interval, about 30 Hz.
pub const DEFAULT_TICK_MS: u64 = 33;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{0} must be a probability in [0, 1]")]
    Probability(&'static str),
    #[error("latency min {0} ms exceeds max {1} ms")]
    Latency(u64, u64),
    #[error("scenario needs at least one client")]
    NoClients,
    #[error("tick must be at least 1 ms")]
    Tick,
}

/// Per-datagram behaviour of every link, uplink and downlink alike.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub loss_rate: f64,
    pub latency_min_ms: u64,
    pub latency_max_ms: u64,
    /// Chance that a datagram gets an extra delay of up to `reorder_extra_ms`.
    pub reorder_rate: f64,
    pub reorder_extra_ms: u64,
    pub duplicate_rate: f64,
    pub rng_seed: u64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            loss_rate: 0.0,
            latency_min_ms: 5,
            latency_max_ms: 20,
            reorder_rate: 0.0,
            reorder_extra_ms: 50,
            duplicate_rate: 0.0,
            rng_seed: 0,
        }
    }
}

impl NetworkModel {
    pub fn lossy(loss_rate: f64, rng_seed: u64) -> Self {
        NetworkModel {
            loss_rate,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("loss_rate", self.loss_rate),
            ("reorder_rate", self.reorder_rate),
            ("duplicate_rate", self.duplicate_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Probability(name));
            }
        }
        if self.latency_min_ms > self.latency_max_ms {
            return Err(SimError::Latency(self.latency_min_ms, self.latency_max_ms));
        }
        Ok(())
    }
}

/// Frames for one client, one per tick. Past the end the last frame is held.
pub type Script = Vec<HandFrame>;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub scripts: Vec<Script>,
    pub ticks: usize,
    pub tick_ms: u64,
    pub mtu: usize,
    pub model: NetworkModel,
    /// Datagrams the server relays per tick; `None` relays everything on arrival.
    pub server_budget: Option<usize>,
    /// Extra copies of each client's POSE message per tick, for load asymmetry.
    pub pose_repeat: usize,
    pub master_mode: bool,
}

impl Scenario {
    pub fn new(scripts: Vec<Script>, ticks: usize, model: NetworkModel) -> Self {
        Scenario {
            scripts,
            ticks,
            tick_ms: DEFAULT_TICK_MS,
            mtu: DEFAULT_MTU,
            model,
            server_budget: None,
            pose_repeat: 0,
            master_mode: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TypeMetrics {
    /// Datagrams handed to the network.
    pub injected: u64,
    /// Datagram copies that reached their destination, duplicates included.
    pub delivered: u64,
    pub dropped: u64,
    pub duplicated: u64,
    /// Largest fair-scheduler gap at the server, in picks.
    pub max_send_gap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimMetrics {
    pub clients: usize,
    pub ticks_run: usize,
    pub per_type: BTreeMap<MsgType, TypeMetrics>,
    /// Per receiver, the oldest peer state it held at any tick boundary, in ms since the
    /// sender emitted it.
    pub max_staleness_ms: Vec<u64>,
    /// Messages that reached a store but did not decode. Always zero unless a partial
    /// message slipped through reassembly.
    pub invalid_merged: u64,
    pub messages_merged: u64,
    /// Every receiver holds exactly every peer's final state.
    pub converged: bool,
    /// Some receiver's delta-applying strawman ended on a transform other than the sender's.
    pub strawman_desynced: bool,
    pub active_types: usize,
}

impl SimMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Node {
    Server,
    Client(usize),
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    order: u64,
    to: Node,
    from: Node,
    bytes: Arc<[u8]>,
}

struct Network {
    model: NetworkModel,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Event>>,
    order: u64,
    per_type: [TypeMetrics; 4],
}

impl Network {
    fn latency(&mut self) -> u64 {
        let mut d = self
            .rng
            .random_range(self.model.latency_min_ms..=self.model.latency_max_ms);
        if self.rng.random_bool(self.model.reorder_rate) {
            d += self.rng.random_range(1..=self.model.reorder_extra_ms.max(1));
        }
        d
    }

    fn send(&mut self, now: u64, from: Node, to: Node, bytes: Arc<[u8]>) {
        let t = MsgType::from_u8(bytes[3]).expect("own datagrams are well-formed");
        let m = &mut self.per_type[t.index()];
        m.injected += 1;
        if self.rng.random_bool(self.model.loss_rate) {
            m.dropped += 1;
            return;
        }
        let copies = if self.rng.random_bool(self.model.duplicate_rate) {
            m.duplicated += 1;
            2
        } else {
            1
        };
        for _ in 0..copies {
            let time = now + self.latency();
            self.order += 1;
            self.queue.push(Reverse(Event {
                time,
                order: self.order,
                to,
                from,
                bytes: bytes.clone(),
            }));
        }
    }

    fn pop_before(&mut self, end: u64) -> Option<Event> {
        if self.queue.peek()?.0.time < end {
            self.queue.pop().map(|r| r.0)
        } else {
            None
        }
    }
}

struct Receiver {
    reassembly: ReassemblyBuffer,
    store: StateStore,
    /// Strawman: transform per sender, built only from deltas.
    strawman: HashMap<u16, GraphTransform>,
    max_staleness: u64,
}

fn client_id(i: usize) -> u16 {
    i as u16 + 1
}

/// Runs the scenario to completion, then keeps the network running without new frames until
/// every datagram has landed.
pub fn run_scenario(sc: &Scenario) -> Result<SimMetrics, SimError> {
    sc.model.validate()?;
    if sc.scripts.is_empty() {
        return Err(SimError::NoClients);
    }
    if sc.tick_ms == 0 {
        return Err(SimError::Tick);
    }
    let n = sc.scripts.len();
    let mut net = Network {
        model: sc.model.clone(),
        rng: ChaCha8Rng::seed_from_u64(sc.model.rng_seed),
        queue: BinaryHeap::new(),
        order: 0,
        per_type: Default::default(),
    };
    let mut hub = SessionHub::new(sc.mtu).with_master_mode(sc.master_mode);
    let mut sessions: Vec<ClientSession> = (0..n).map(|i| ClientSession::new(client_id(i))).collect();
    let mut receivers: Vec<Receiver> = (0..n)
        .map(|_| Receiver {
            reassembly: ReassemblyBuffer::new(),
            store: StateStore::new(),
            strawman: HashMap::new(),
            max_staleness: 0,
        })
        .collect();
    for i in 0..n {
        hub.join(client_id(i), Node::Client(i));
    }

    // Sender-side history: emission time per message, and each TRANSFORM's delta from the
    // previous one for the strawman.
    let mut emitted_at: HashMap<(u16, MsgType, u32), u64> = HashMap::new();
    let mut deltas: HashMap<(u16, u32), (Vec3, f64)> = HashMap::new();
    let mut last_sent: Vec<GraphTransform> = vec![GraphTransform::IDENTITY; n];
    let mut final_state: Vec<StateStore> = vec![StateStore::new(); n];
    let mut invalid_merged = 0;
    let mut merged = 0;

    let mut tick = 0usize;
    loop {
        let now = tick as u64 * sc.tick_ms;
        let scripted = tick < sc.ticks;
        if !scripted && net.queue.is_empty() && hub.queued() == 0 {
            break;
        }

        if scripted && tick > 0 {
            for (r, rx) in receivers.iter_mut().enumerate() {
                for m in rx.store.iter() {
                    if m.client_id == client_id(r) {
                        continue;
                    }
                    let sent = emitted_at[&(m.client_id, m.msg_type, m.sequence)];
                    rx.max_staleness = rx.max_staleness.max(now - sent);
                }
            }
        }

        if scripted {
            for (i, s) in sessions.iter_mut().enumerate() {
                let script = &sc.scripts[i];
                let Some(frame) = script.get(tick).or(script.last()) else {
                    continue;
                };
                let mut msgs = s.step(frame, None);
                if let Some(pose) = msgs.iter().find(|m| m.msg_type == MsgType::Pose).cloned() {
                    for _ in 0..sc.pose_repeat {
                        msgs.push(s.restamp(&pose));
                    }
                }
                for m in msgs {
                    emitted_at.insert((m.client_id, m.msg_type, m.sequence), now);
                    if m.msg_type == MsgType::Transform {
                        let cur = s.state.current;
                        let prev = last_sent[i];
                        deltas.insert(
                            (m.client_id, m.sequence),
                            (cur.translation - prev.translation, cur.scale / prev.scale),
                        );
                        last_sent[i] = cur;
                    }
                    for d in encode_message(&m, sc.mtu).expect("session payloads fit") {
                        net.send(now, Node::Client(i), Node::Server, d.encode().into());
                    }
                    final_state[i].merge(m);
                }
            }
        }

        let end = now + sc.tick_ms;
        while let Some(ev) = net.pop_before(end) {
            net.per_type[MsgType::from_u8(ev.bytes[3]).unwrap().index()].delivered += 1;
            match ev.to {
                Node::Server => {
                    for d in hub.receive(&ev.from, &ev.bytes) {
                        net.send(ev.time, Node::Server, d.to, d.bytes);
                    }
                    if sc.server_budget.is_none() {
                        for d in hub.drain(None) {
                            net.send(ev.time, Node::Server, d.to, d.bytes);
                        }
                    }
                }
                Node::Client(r) => {
                    let rx = &mut receivers[r];
                    let Ok(d) = Datagram::decode(&ev.bytes) else {
                        rx.reassembly.counters.malformed += 1;
                        continue;
                    };
                    let Some(m) = rx.reassembly.push(d) else {
                        continue;
                    };
                    merged += 1;
                    if RemoteView::default().apply(&m).is_err() {
                        invalid_merged += 1;
                        continue;
                    }
                    if m.msg_type == MsgType::Transform {
                        let (dt, ds) = deltas[&(m.client_id, m.sequence)];
                        let t = rx.strawman.entry(m.client_id).or_default();
                        t.translation += dt;
                        t.scale *= ds;
                    }
                    rx.store.merge(m);
                }
            }
        }
        if let Some(b) = sc.server_budget {
            for d in hub.drain(Some(b)) {
                net.send(end, Node::Server, d.to, d.bytes);
            }
        }
        tick += 1;
    }

    let mut converged = true;
    let mut desynced = false;
    for (r, rx) in receivers.iter().enumerate() {
        let mut expect = StateStore::new();
        for (c, st) in final_state.iter().enumerate() {
            if c == r {
                continue;
            }
            for m in st.iter() {
                if sc.master_mode && m.msg_type == MsgType::Transform && hub.master() != Some(m.client_id) {
                    continue;
                }
                expect.merge(m.clone());
            }
            if let Some(m) = st.get(client_id(c), MsgType::Transform) {
                let want = GraphTransform::from_payload(&TransformPayload::decode(&m.payload).unwrap());
                let got = rx.strawman.get(&client_id(c)).copied().unwrap_or_default();
                let off = (got.translation - want.translation).norm() + (got.scale - want.scale).abs();
                if off > 1e-5 {
                    desynced = true;
                }
            }
        }
        if !rx.store.same_state(&expect) {
            converged = false;
        }
    }

    let stats = hub.send_stats();
    let mut per_type = BTreeMap::new();
    for t in MsgType::ALL {
        let mut m = net.per_type[t.index()];
        m.max_send_gap = stats.max_gap_of(t);
        if m.injected > 0 {
            per_type.insert(t, m);
        }
    }
    Ok(SimMetrics {
        clients: n,
        ticks_run: tick,
        active_types: per_type.len(),
        per_type,
        max_staleness_ms: receivers.iter().map(|r| r.max_staleness).collect(),
        invalid_merged,
        messages_merged: merged,
        converged,
        strawman_desynced: desynced,
    })
}

/// A client that grabs and drags the graph, scales it, points around, and then holds an open
/// hand for the last `hold` ticks. `phase` varies the motion between clients.
pub fn drag_then_hold(ticks: usize, hold: usize, phase: f64) -> Script {
    let active = ticks.saturating_sub(hold);
    let mut out = Vec::with_capacity(ticks);
    let mut last = Vec3::ZERO;
    for i in 0..ticks {
        let t = i as f64 * 0.15 + phase;
        let (pos, code) = if i < active {
            let pos = Vec3::new(0.3 * t.sin(), 0.2 * (1.3 * t).cos(), 0.1 * (0.7 * t).sin());
            let code = match (i / 15) % 4 {
                0 | 2 => PoseCode::FIST,
                1 => PoseCode::PINCH,
                _ => PoseCode::POINT,
            };
            last = pos;
            (pos, code)
        } else {
            (last, PoseCode::OPEN)
        };
        out.push(HandFrame::with_pose(pos, Vec3::Z, code, i as u64 * DEFAULT_TICK_MS));
    }
    out
}

/// `clients` scripted clients with the given loss, holding still for the final ten ticks.
pub fn standard_scenario(clients: usize, ticks: usize, model: NetworkModel) -> Scenario {
    let hold = 10.min(ticks);
    let scripts = (0..clients)
        .map(|c| drag_then_hold(ticks, hold, c as f64 * 1.7))
        .collect();
    Scenario::new(scripts, ticks, model)
}
