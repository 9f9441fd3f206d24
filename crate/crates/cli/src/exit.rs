//! Exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | any other failure (I/O, entropy, unexpected) |
//! | 2    | usage: bad flags, config or parameters |
//! | 10   | handshake mismatch (parameters or key id) |
//! | 11   | timeout waiting for the peer |
//! | 12   | rekey needed before the requested work finished |
//! | 13   | key starvation: not enough unspent key bits |
//! | 14   | integrity: framing, digest, key file, sidecar or tag failure |

use notp_core::keyfile::KeyFileError;
use notp_core::net::{FailureClass, NetError};
use notp_core::protocol::ProtocolError;
use notp_core::transcript::TranscriptError;
use thiserror::Error;

pub const OK: u8 = 0;
pub const OTHER: u8 = 1;
pub const USAGE: u8 = 2;
pub const HANDSHAKE: u8 = 10;
pub const TIMEOUT: u8 = 11;
pub const REKEY: u8 = 12;
pub const STARVATION: u8 = 13;
pub const INTEGRITY: u8 = 14;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Rekey(String),
    #[error("{0}")]
    Integrity(String),
}

fn protocol_code(e: &ProtocolError) -> u8 {
    match e {
        ProtocolError::RekeyNeeded { .. } => REKEY,
        ProtocolError::KeyStarvation { .. } => STARVATION,
        ProtocolError::ConditionFailed(_) | ProtocolError::KeyTooShort(_) | ProtocolError::SelectorWidth(_) => USAGE,
        _ => OTHER,
    }
}

pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Usage(_) => USAGE,
                Failure::Rekey(_) => REKEY,
                Failure::Integrity(_) => INTEGRITY,
            };
        }
        if let Some(e) = cause.downcast_ref::<NetError>() {
            if let NetError::Protocol(p) = e {
                return protocol_code(p);
            }
            return match e.class() {
                FailureClass::Handshake => HANDSHAKE,
                FailureClass::Timeout => TIMEOUT,
                FailureClass::Integrity | FailureClass::Framing => INTEGRITY,
                FailureClass::Protocol | FailureClass::Transport => OTHER,
            };
        }
        if let Some(e) = cause.downcast_ref::<ProtocolError>() {
            return protocol_code(e);
        }
        if let Some(e) = cause.downcast_ref::<KeyFileError>() {
            return match e {
                KeyFileError::Io(_) | KeyFileError::Exists(_) | KeyFileError::GenesisExport => OTHER,
                _ => INTEGRITY,
            };
        }
        if let Some(e) = cause.downcast_ref::<TranscriptError>() {
            return match e {
                TranscriptError::Mismatch(_) | TranscriptError::Truth { .. } => USAGE,
                _ => INTEGRITY,
            };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                return TIMEOUT;
            }
        }
    }
    OTHER
}
