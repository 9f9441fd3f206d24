//! Wire protocol and session driver.
//!
//! Every frame is a 26-byte header followed by a payload:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NOTP"
//! 4       1     version 0x01
//! 5       1     type
//! 6       16    session id
//! 22      4     payload length, little-endian, at most 2^20
//! ```
//!
//! A session is a HELLO / HELLO_ACK handshake followed by cycles. In each
//! cycle the sender transmits BATCH, the receiver answers BATCH_ACK with
//! a digest of what it recovered, and the sender either confirms with the
//! same BATCH_ACK or reports ERROR. Only after the confirmation do both
//! sides rotate. The initiator decides when to stop: it sends CLOSE in
//! place of a confirmation or at the start of one of its own cycles. A
//! sender that cannot encode another batch sends REKEY_NEEDED and the
//! initiator closes.

mod frame;
mod pair;
mod payload;
mod session;
mod transport;

use std::io;

use thiserror::Error;

use crate::error::EntropyError;
use crate::protocol::ProtocolError;

pub use frame::{
    decode_frame, decode_header, encode_frame, read_frame, Frame, FrameError, FrameType, ReadError, HEADER_LEN,
    MAGIC, MAX_PAYLOAD, VERSION,
};
pub use payload::{
    decode_rekey, encode_rekey, AckPayload, BatchPayload, ErrorCode, ErrorPayload, HelloPayload, PayloadError,
    DPHI_RADIANS_SENTINEL, MAX_WIRE_BATCH, WIRE_ADC_BITS,
};
pub use pair::{run_pair, PairOutcome};
pub use session::{
    read_hello, reject_hello, respond, run_initiator, run_responder, IncomingHello, LinkConfig, SessionEnd,
    SessionReport, DEFAULT_DEADLINE,
};
pub use transport::{mem_pipe, mem_pipe_with_tamper, MemPipe, Tamper, Transport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("framing error: {0}")]
    Frame(#[from] FrameError),
    #[error("{0}")]
    Payload(#[from] PayloadError),
    #[error("handshake mismatch: {0}")]
    Handshake(String),
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("transport error: {0}")]
    Io(io::Error),
    #[error("acceptance digest mismatch on cycle {0}")]
    Integrity(u32),
    #[error("expected {expected:?} frame, got {got:?}")]
    Unexpected { expected: FrameType, got: FrameType },
    #[error("batch for cycle {got} arrived during cycle {expected}")]
    OutOfSequence { expected: u32, got: u32 },
    #[error("frame belongs to a different session")]
    SessionMismatch,
    #[error("peer reported error {code}: {message}")]
    Peer { code: u8, message: String },
    #[error("{0}-bit samples do not fit the 16-bit wire profile")]
    WireProfile(u32),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Coarse failure classes, used for exit codes and robustness accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureClass {
    /// Malformed, truncated, unexpected or missing frames.
    Framing,
    Handshake,
    Timeout,
    /// The acceptance digest did not match.
    Integrity,
    Protocol,
    Transport,
}

impl NetError {
    pub(crate) fn from_io(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => NetError::Timeout,
            io::ErrorKind::UnexpectedEof
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe => NetError::Closed,
            _ => NetError::Io(e),
        }
    }

    pub fn class(&self) -> FailureClass {
        match self {
            NetError::Frame(_)
            | NetError::Payload(_)
            | NetError::Unexpected { .. }
            | NetError::OutOfSequence { .. }
            | NetError::SessionMismatch
            | NetError::Closed => FailureClass::Framing,
            NetError::Handshake(_) | NetError::WireProfile(_) => FailureClass::Handshake,
            NetError::Timeout => FailureClass::Timeout,
            NetError::Integrity(_) => FailureClass::Integrity,
            NetError::Protocol(_) | NetError::Entropy(_) => FailureClass::Protocol,
            NetError::Io(_) => FailureClass::Transport,
            NetError::Peer { code, .. } => match *code {
                c if c == ErrorCode::Handshake as u8 => FailureClass::Handshake,
                c if c == ErrorCode::Integrity as u8 => FailureClass::Integrity,
                c if c == ErrorCode::Protocol as u8 => FailureClass::Protocol,
                _ => FailureClass::Framing,
            },
        }
    }

    /// Code to report to the peer, or `None` when the peer already knows
    /// or cannot be reached.
    fn wire_code(&self) -> Option<ErrorCode> {
        match self.class() {
            _ if matches!(self, NetError::Peer { .. }) => None,
            FailureClass::Timeout | FailureClass::Transport => None,
            _ if matches!(self, NetError::Closed) => None,
            FailureClass::Framing => Some(ErrorCode::Framing),
            FailureClass::Handshake => Some(ErrorCode::Handshake),
            FailureClass::Integrity => Some(ErrorCode::Integrity),
            FailureClass::Protocol => Some(ErrorCode::Protocol),
        }
    }
}
