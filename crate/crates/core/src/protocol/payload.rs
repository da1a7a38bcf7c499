//! Fixed-layout little-endian payload bodies.

use super::{MsgType, ProtocolError};

/// Highlight payload value meaning "nothing selected".
pub const NO_HIGHLIGHT: u32 = 0xFFFF_FFFF;

struct Writer(Vec<u8>);

impl Writer {
    fn with_capacity(n: usize) -> Self {
        Writer(Vec::with_capacity(n))
    }
    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn f32(&mut self) -> f32 {
        let (h, t) = self.0.split_at(4);
        self.0 = t;
        f32::from_le_bytes(h.try_into().unwrap())
    }
    fn f32x3(&mut self) -> [f32; 3] {
        [self.f32(), self.f32(), self.f32()]
    }
    fn u8(&mut self) -> u8 {
        let b = self.0[0];
        self.0 = &self.0[1..];
        b
    }
}

fn check(kind: MsgType, bytes: &[u8], expected: usize) -> Result<(), ProtocolError> {
    if bytes.len() == expected {
        Ok(())
    } else {
        Err(ProtocolError::PayloadShape {
            kind,
            expected,
            got: bytes.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PosePayload {
    pub hand_position: [f32; 3],
    pub hand_forward: [f32; 3],
    pub pose_code: u8,
    /// `(knuckle, tip)` per finger, thumb first.
    pub fingers: [([f32; 3], [f32; 3]); 5],
}

impl PosePayload {
    pub const LEN: usize = 12 + 12 + 1 + 5 * 24;

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(Self::LEN);
        w.f32s(&self.hand_position);
        w.f32s(&self.hand_forward);
        w.0.push(self.pose_code);
        for (k, t) in &self.fingers {
            w.f32s(k);
            w.f32s(t);
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        check(MsgType::Pose, bytes, Self::LEN)?;
        let mut r = Reader(bytes);
        let hand_position = r.f32x3();
        let hand_forward = r.f32x3();
        let pose_code = r.u8();
        let mut fingers = [([0.0; 3], [0.0; 3]); 5];
        for f in &mut fingers {
            *f = (r.f32x3(), r.f32x3());
        }
        Ok(PosePayload {
            hand_position,
            hand_forward,
            pose_code,
            fingers,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformPayload {
    pub translation: [f32; 3],
    pub scale: f32,
}

impl TransformPayload {
    pub const LEN: usize = 16;

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(Self::LEN);
        w.f32s(&self.translation);
        w.f32s(&[self.scale]);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        check(MsgType::Transform, bytes, Self::LEN)?;
        let mut r = Reader(bytes);
        Ok(TransformPayload {
            translation: r.f32x3(),
            scale: r.f32(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HighlightPayload {
    pub vertex: Option<u32>,
}

impl HighlightPayload {
    pub const LEN: usize = 4;

    pub fn encode(&self) -> Vec<u8> {
        self.vertex.unwrap_or(NO_HIGHLIGHT).to_le_bytes().to_vec()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        check(MsgType::Highlight, bytes, Self::LEN)?;
        let v = u32::from_le_bytes(bytes.try_into().unwrap());
        Ok(HighlightPayload {
            vertex: (v != NO_HIGHLIGHT).then_some(v),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresencePayload {
    pub head_position: [f32; 3],
    /// Quaternion `(x, y, z, w)`.
    pub orientation: [f32; 4],
}

impl Default for PresencePayload {
    fn default() -> Self {
        PresencePayload {
            head_position: [0.0; 3],
            orientation: [0.0, 0.0, 0.0, 1.0],
        }
    }
}

impl PresencePayload {
    pub const LEN: usize = 28;

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(Self::LEN);
        w.f32s(&self.head_position);
        w.f32s(&self.orientation);
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        check(MsgType::Presence, bytes, Self::LEN)?;
        let mut r = Reader(bytes);
        Ok(PresencePayload {
            head_position: r.f32x3(),
            orientation: [r.f32(), r.f32(), r.f32(), r.f32()],
        })
    }
}
