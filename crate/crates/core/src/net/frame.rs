use std::io::Read;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"NOTP";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 26;
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    Hello = 0x01,
    HelloAck = 0x02,
    Batch = 0x03,
    BatchAck = 0x04,
    RekeyNeeded = 0x05,
    Close = 0x06,
    Error = 0x7f,
}

impl FrameType {
    pub const ALL: [FrameType; 7] = [
        FrameType::Hello,
        FrameType::HelloAck,
        FrameType::Batch,
        FrameType::BatchAck,
        FrameType::RekeyNeeded,
        FrameType::Close,
        FrameType::Error,
    ];

    pub fn from_byte(byte: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == byte)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown frame type {0:#04x}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the 1 MiB limit")]
    Oversize(u64),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub session_id: [u8; 16],
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameType, session_id: [u8; 16], payload: Vec<u8>) -> Result<Self, FrameError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(FrameError::Oversize(payload.len() as u64));
        }
        Ok(Self { kind, session_id, payload })
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    debug_assert!(frame.payload.len() <= MAX_PAYLOAD);
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.kind as u8);
    out.extend_from_slice(&frame.session_id);
    out.extend_from_slice(&(frame.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&frame.payload);
    out
}

/// Validated header fields: type, session id, payload length.
pub fn decode_header(header: &[u8; HEADER_LEN]) -> Result<(FrameType, [u8; 16], usize), FrameError> {
    if header[..4] != MAGIC {
        return Err(FrameError::BadMagic);
    }
    if header[4] != VERSION {
        return Err(FrameError::BadVersion(header[4]));
    }
    let kind = FrameType::from_byte(header[5]).ok_or(FrameError::UnknownType(header[5]))?;
    let session_id: [u8; 16] = header[6..22].try_into().expect("16 bytes");
    let len = u32::from_le_bytes(header[22..26].try_into().expect("4 bytes"));
    if len as usize > MAX_PAYLOAD {
        return Err(FrameError::Oversize(len.into()));
    }
    Ok((kind, session_id, len as usize))
}

/// Decodes one frame from the front of `bytes` and returns the unread rest.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, &[u8]), FrameError> {
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(FrameError::Truncated { needed: HEADER_LEN, available: bytes.len() })?;
    let (kind, session_id, len) = decode_header(header)?;
    let end = HEADER_LEN + len;
    if bytes.len() < end {
        return Err(FrameError::Truncated { needed: end, available: bytes.len() });
    }
    let frame = Frame { kind, session_id, payload: bytes[HEADER_LEN..end].to_vec() };
    Ok((frame, &bytes[end..]))
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads exactly one frame from a stream. Header problems are reported
/// before any payload byte is consumed.
pub fn read_frame<R: Read + ?Sized>(reader: &mut R) -> Result<Frame, ReadError> {
    let mut header = [0u8; HEADER_LEN];
    reader.read_exact(&mut header)?;
    let (kind, session_id, len) = decode_header(&header)?;
    let mut payload = vec![0u8; len];
    reader.read_exact(&mut payload)?;
    Ok(Frame { kind, session_id, payload })
}
