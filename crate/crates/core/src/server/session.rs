use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use tokio::net::UdpSocket;
use tokio::sync::mpsc;

use crate::protocol::{encode_bridge_frame, Delivery, HubCounters, SessionHub};

/// Where a session participant is reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Peer {
    Udp(SocketAddr),
    Bridge(u64),
}

/// One session shared by UDP clients and stream-bridge connections.
///
/// Clients join by sending PRESENCE. Bridge connections also observe everything from the
/// moment they connect. Datagrams are relayed as soon as they arrive.
pub struct SessionRelay {
    hub: Mutex<SessionHub<Peer>>,
    bridges: Mutex<HashMap<u64, mpsc::UnboundedSender<Vec<u8>>>>,
    udp: Mutex<Option<Arc<UdpSocket>>>,
    next_bridge: AtomicU64,
}

impl SessionRelay {
    pub fn new(mtu: usize, master_mode: bool) -> Self {
        SessionRelay {
            hub: Mutex::new(
                SessionHub::new(mtu)
                    .with_master_mode(master_mode)
                    .with_auto_join(true),
            ),
            bridges: Mutex::new(HashMap::new()),
            udp: Mutex::new(None),
            next_bridge: AtomicU64::new(1),
        }
    }

    pub fn set_udp(&self, socket: Arc<UdpSocket>) {
        *self.udp.lock().unwrap() = Some(socket);
    }

    pub fn counters(&self) -> HubCounters {
        self.hub.lock().unwrap().counters()
    }

    /// Registers a bridge connection. Its frames (snapshot first) arrive on the receiver,
    /// each already length-prefixed.
    pub fn open_bridge(&self) -> (u64, mpsc::UnboundedReceiver<Vec<u8>>) {
        let id = self.next_bridge.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::unbounded_channel();
        self.bridges.lock().unwrap().insert(id, tx);
        let snap = self.hub.lock().unwrap().subscribe(Peer::Bridge(id));
        self.dispatch(snap);
        (id, rx)
    }

    pub fn close_bridge(&self, id: u64) {
        self.bridges.lock().unwrap().remove(&id);
        self.hub.lock().unwrap().unsubscribe(&Peer::Bridge(id));
    }

    /// Handles one datagram from `from` and relays whatever it unlocks.
    pub fn ingest(&self, from: Peer, bytes: &[u8]) {
        let out = {
            let mut hub = self.hub.lock().unwrap();
            let mut out = hub.receive(&from, bytes);
            out.extend(hub.drain(None));
            out
        };
        self.dispatch(out);
    }

    fn dispatch(&self, out: Vec<Delivery<Peer>>) {
        if out.is_empty() {
            return;
        }
        let udp = self.udp.lock().unwrap().clone();
        let bridges = self.bridges.lock().unwrap();
        for d in out {
            match d.to {
                Peer::Udp(addr) => {
                    if let Some(s) = &udp {
                        // Best effort, like the rest of the protocol.
                        let _ = s.try_send_to(&d.bytes, addr);
                    }
                }
                Peer::Bridge(id) => {
                    if let Some(tx) = bridges.get(&id) {
                        let mut frame = Vec::with_capacity(d.bytes.len() + 4);
                        encode_bridge_frame(&d.bytes, &mut frame);
                        let _ = tx.send(frame);
                    }
                }
            }
        }
    }
}

/// Receives datagrams forever and feeds them to the relay.
pub async fn run_udp(relay: Arc<SessionRelay>, socket: Arc<UdpSocket>) {
    relay.set_udp(socket.clone());
    let mut buf = vec![0u8; 65536];
    loop {
        match socket.recv_from(&mut buf).await {
            Ok((n, from)) => relay.ingest(Peer::Udp(from), &buf[..n]),
            Err(e) => tracing::debug!("udp receive: {e}"),
        }
    }
}
