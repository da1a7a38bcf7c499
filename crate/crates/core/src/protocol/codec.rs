use super::{Message, MsgType, ProtocolError};

/// The two leading bytes of every datagram, `"GJ"`.
pub const MAGIC: [u8; 2] = *b"GJ";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const DEFAULT_MTU: usize = 1400;
/// Largest message payload; `payload_len` and fragment counts are u16 on the wire.
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

/// One wire frame: a message header plus one fragment of its payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Datagram {
    pub msg_type: MsgType,
    pub client_id: u16,
    pub sequence: u32,
    pub frag_index: u16,
    pub frag_count: u16,
    pub payload: Vec<u8>,
}

impl Datagram {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.client_id.to_le_bytes());
        out.extend_from_slice(&self.sequence.to_le_bytes());
        out.extend_from_slice(&self.frag_index.to_le_bytes());
        out.extend_from_slice(&self.frag_count.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses and validates one datagram. Never panics on arbitrary input.
    pub fn decode(bytes: &[u8]) -> Result<Datagram, ProtocolError> {
        if bytes.len() < HEADER_LEN {
            return Err(ProtocolError::Truncated(bytes.len()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        if bytes[0..2] != MAGIC {
            return Err(ProtocolError::BadMagic(u16::from_be_bytes([bytes[0], bytes[1]])));
        }
        if bytes[2] != VERSION {
            return Err(ProtocolError::BadVersion(bytes[2]));
        }
        let msg_type = MsgType::from_u8(bytes[3]).ok_or(ProtocolError::BadType(bytes[3]))?;
        let client_id = u16_at(4);
        let sequence = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]);
        let frag_index = u16_at(10);
        let frag_count = u16_at(12);
        let payload_len = u16_at(14) as usize;
        if frag_count == 0 || frag_index >= frag_count {
            return Err(ProtocolError::BadFragment {
                index: frag_index,
                count: frag_count,
            });
        }
        let rest = &bytes[HEADER_LEN..];
        if rest.len() != payload_len {
            return Err(ProtocolError::LengthMismatch {
                declared: payload_len,
                actual: rest.len(),
            });
        }
        Ok(Datagram {
            msg_type,
            client_id,
            sequence,
            frag_index,
            frag_count,
            payload: rest.to_vec(),
        })
    }
}

/// Splits a message into datagrams of at most `mtu` bytes each.
pub fn encode_message(m: &Message, mtu: usize) -> Result<Vec<Datagram>, ProtocolError> {
    if m.payload.len() > MAX_PAYLOAD {
        return Err(ProtocolError::PayloadTooLarge(m.payload.len()));
    }
    if mtu <= HEADER_LEN {
        return Err(ProtocolError::MtuTooSmall(mtu));
    }
    let chunk = (mtu - HEADER_LEN).min(MAX_PAYLOAD);
    let count = m.payload.len().div_ceil(chunk).max(1);
    if count > u16::MAX as usize {
        return Err(ProtocolError::TooManyFragments(count));
    }
    let make = |i: usize, body: &[u8]| Datagram {
        msg_type: m.msg_type,
        client_id: m.client_id,
        sequence: m.sequence,
        frag_index: i as u16,
        frag_count: count as u16,
        payload: body.to_vec(),
    };
    if m.payload.is_empty() {
        return Ok(vec![make(0, &[])]);
    }
    Ok(m.payload
        .chunks(chunk)
        .enumerate()
        .map(|(i, c)| make(i, c))
        .collect())
}

/// Frames one datagram for the reliable stream bridge: `u32` little-endian length, then the
/// datagram bytes exactly as they would travel over UDP.
pub fn encode_bridge_frame(datagram: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(&(datagram.len() as u32).to_le_bytes());
    out.extend_from_slice(datagram);
}

/// Splits a buffer of length-prefixed frames. Returns the complete frames and the number of
/// bytes consumed; a trailing partial frame is left for the next call.
pub fn decode_bridge_frames(buf: &[u8]) -> (Vec<&[u8]>, usize) {
    let mut frames = Vec::new();
    let mut pos = 0;
    while buf.len() - pos >= 4 {
        let len = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        if buf.len() - pos - 4 < len {
            break;
        }
        frames.push(&buf[pos + 4..pos + 4 + len]);
        pos += 4 + len;
    }
    (frames, pos)
}
