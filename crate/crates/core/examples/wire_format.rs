//! Fragment a POSE message, reassemble it out of order, and frame it for the WebSocket bridge.

use graphite::protocol::{
    decode_bridge_frames, decode_datagram, encode_bridge_frame, encode_message, Datagram, Message, MsgType,
    PosePayload, ReassemblyBuffer,
};

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let pose = PosePayload {
        hand_position: [0.1, 1.2, -0.3],
        hand_forward: [0.0, 0.0, 1.0],
        pose_code: 0b00011,
        ..Default::default()
    };
    let m = Message::new(MsgType::Pose, 7, 42, pose.encode());
    let frags = encode_message(&m, 64).unwrap();
    println!("{}-byte payload -> {} datagrams at MTU 64", m.payload.len(), frags.len());
    let bytes: Vec<Vec<u8>> = frags.iter().map(Datagram::encode).collect();
    println!("first header: {}", hex(&bytes[0][..16]));

    let mut r = ReassemblyBuffer::new();
    let mut out = None;
    for b in bytes.iter().rev() {
        out = decode_datagram(b, &mut r).or(out);
    }
    let back = out.expect("complete");
    assert_eq!(back, m);
    println!("reassembled in reverse order: {:?}", PosePayload::decode(&back.payload).unwrap().hand_position);

    let mut stream = Vec::new();
    for b in &bytes {
        encode_bridge_frame(b, &mut stream);
    }
    let (frames, used) = decode_bridge_frames(&stream);
    println!("bridge stream {} bytes, {} frames, {used} consumed", stream.len(), frames.len());
}
