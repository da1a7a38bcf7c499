//! Start the server on ephemeral ports, run a job over HTTP and relay a datagram over UDP.

use std::net::SocketAddr;
use std::time::Duration;

use graphite::generators::karate_club;
use graphite::graph::to_document;
use graphite::interaction::GraphTransform;
use graphite::protocol::{encode_message, Message, MsgType, PresencePayload};
use graphite::server::{Launcher, ServeConfig, Server};
use tokio::net::UdpSocket;

async fn send(sock: &UdpSocket, to: SocketAddr, m: Message) {
    for d in encode_message(&m, 1400).unwrap() {
        sock.send_to(&d.encode(), to).await.unwrap();
    }
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(ServeConfig::new(dir.path(), Launcher::Thread)).await.unwrap();
    let base = format!("http://{}", server.http_addr);
    println!("http {} udp {}", server.http_addr, server.udp_addr);

    let http = reqwest::Client::new();
    let submit: serde_json::Value = http
        .post(format!("{base}/jobs?iters=500&seed=3"))
        .body(to_document(&karate_club()))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = submit["job_id"].as_str().unwrap().to_string();
    loop {
        let s: serde_json::Value = http.get(format!("{base}/jobs/{id}")).send().await.unwrap().json().await.unwrap();
        println!("job {id}: {}", s["state"]);
        if s["state"] == "done" || s["state"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    let result = http.get(format!("{base}/jobs/{id}/result")).send().await.unwrap().bytes().await.unwrap();
    println!("result {} bytes", result.len());

    // PRESENCE announces a client; everything else from an unknown sender is dropped.
    let a = UdpSocket::bind("127.0.0.1:0").await.unwrap();
    let b = UdpSocket::bind("127.0.0.1:0").await.unwrap();
    let to = server.udp_addr;
    for (sock, client) in [(&a, 1), (&b, 2)] {
        send(sock, to, Message::new(MsgType::Presence, client, 0, PresencePayload::default().encode())).await;
    }
    tokio::time::sleep(Duration::from_millis(100)).await;
    let transform = GraphTransform { scale: 2.0, ..GraphTransform::IDENTITY };
    send(&a, to, Message::new(MsgType::Transform, 1, 1, transform.to_payload().encode())).await;
    let mut buf = [0u8; 1500];
    loop {
        let n = tokio::time::timeout(Duration::from_secs(2), b.recv(&mut buf)).await.unwrap().unwrap();
        let d = graphite::protocol::Datagram::decode(&buf[..n]).unwrap();
        println!("client 2 received {:?} from client {}", d.msg_type, d.client_id);
        if d.msg_type == MsgType::Transform {
            break;
        }
    }
    println!("relay counters: {:?}", server.relay.counters());
}
