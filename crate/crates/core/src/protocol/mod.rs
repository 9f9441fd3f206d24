//! Chained key distribution between two parties.
//!
//! Cycle `t` carries a fresh key `K_{t+1}` encoded in the bases given by the
//! current shared key `K_t`, starting from the genesis key `K₀`. Directions
//! alternate: the initiator sends on even cycles, the responder on odd ones.
//! After both sides hold the new key they [`SessionState::rotate`]: a
//! `⌈len/L⌉` fraction of it is discarded, the rest becomes the next basis
//! key and is harvested for one-time-pad and MAC use.

mod ledger;
mod otp;
mod session;
pub mod shuffle;

use thiserror::Error;

use crate::analysis::ConditionReport;
use crate::error::{DomainError, EntropyError};

pub use ledger::{LeakageLedger, DEFAULT_MAX_BUDGET};
pub use otp::{mac_tag, mac_verify, otp_decrypt, otp_encrypt, xor_keystream, SecretSource, MAC_KEY_BITS};
pub use session::{
    apply_discard, init_session, BatchTruth, InitOptions, ProducedBatch, Role, SessionState, DISCARD_SEED_BITS,
    MIN_GENESIS_BITS,
};
pub use shuffle::{select_permutation, ShuffleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RekeyReason {
    BudgetExhausted,
    BasisExhausted,
    /// Too few shared bits left for shuffle selectors or discard seeds.
    ControlExhausted,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("rekey needed ({reason:?}): requested {requested} emissions, {available} available")]
    RekeyNeeded { reason: RekeyReason, requested: usize, available: usize },
    #[error("key starvation: need {needed} unspent bits, have {available}")]
    KeyStarvation { needed: usize, available: usize },
    #[error("genesis key has {0} bits, at least {MIN_GENESIS_BITS} required")]
    KeyTooShort(usize),
    #[error("operating condition fails (left ratio {:.3}, right ratio {:.3})", .0.ratio_left, .0.ratio_right)]
    ConditionFailed(ConditionReport),
    #[error("rotation requires a completed batch of matching length")]
    RotationOutOfOrder,
    #[error("a batch is already awaiting rotation")]
    BatchInFlight,
    #[error("not this party's turn to send on cycle {0}")]
    NotOurTurn(u32),
    #[error("shuffle needs at least 2 positions (got {0})")]
    ShuffleTooShort(usize),
    #[error("selector width must be 16..=64 bits (got {0})")]
    SelectorWidth(u8),
    #[error("discard needs {needed} shared secret bits, got {got}")]
    InsufficientSecret { needed: usize, got: usize },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
