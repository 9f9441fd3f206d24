use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::ledger::{LeakageLedger, DEFAULT_MAX_BUDGET};
use super::shuffle::{self, ShuffleConfig};
use super::{ProtocolError, RekeyReason};
use crate::analysis::{self, PROTOCOL_REPETITIONS};
use crate::entropy::EntropyStream;
use crate::keys::{bits_to_u64, pack_bits, Bit, KeyBuffer, KeyOrigin};
use crate::physics::{self, NoiseParams, PhaseSample};

pub const MIN_GENESIS_BITS: usize = 64;
/// Shared secret bits consumed per discard to seed the position choice.
pub const DISCARD_SEED_BITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        }
    }

    /// Initiator sends on even cycles, responder on odd ones.
    pub fn sends_on(self, cycle: u32) -> bool {
        (cycle % 2 == 0) == (self == Role::Initiator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Proceed even when the operating condition fails.
    pub allow_unsafe: bool,
    pub repetitions: u32,
    pub max_budget: u64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self { allow_unsafe: false, repetitions: PROTOCOL_REPETITIONS, max_budget: DEFAULT_MAX_BUDGET }
    }
}

/// What the sender put on the wire for one batch, plus ground truth that
/// stays local.
#[derive(Debug, Clone)]
pub struct ProducedBatch {
    pub cycle: u32,
    pub samples: Vec<PhaseSample>,
    /// Unshuffled fresh bits; becomes `K_{t+1}` after rotation.
    pub pending_key: KeyBuffer,
    pub truth: BatchTruth,
}

/// Per-emission data bit (after shuffling) and basis bit. Harness-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchTruth {
    pub data_bits: Vec<Bit>,
    pub bases: Vec<Bit>,
    pub selector: Option<u64>,
}

/// One party's protocol state. Single owner; clone to snapshot.
#[derive(Debug, Clone)]
pub struct SessionState {
    role: Role,
    params: NoiseParams,
    basis_key: KeyBuffer,
    // The genesis key once it stops being the basis. Its unspent bits serve
    // as the first source of control bits (selectors, discard seeds).
    genesis_reserve: Option<KeyBuffer>,
    harvested: Vec<KeyBuffer>,
    ledger: LeakageLedger,
    shuffle: ShuffleConfig,
    cycle: u32,
    in_flight: Option<usize>,
}

/// Sets up a session on top of the shared genesis key.
pub fn init_session(
    genesis_key: KeyBuffer,
    params: NoiseParams,
    shuffle: ShuffleConfig,
    role: Role,
    options: InitOptions,
) -> Result<SessionState, ProtocolError> {
    if genesis_key.len() < MIN_GENESIS_BITS {
        return Err(ProtocolError::KeyTooShort(genesis_key.len()));
    }
    let condition = analysis::check_condition(&params);
    if !condition.pass && !options.allow_unsafe {
        return Err(ProtocolError::ConditionFailed(condition));
    }
    let leak = analysis::leak_report(&params, options.repetitions)?;
    let mut basis_key = genesis_key;
    basis_key.set_origin(KeyOrigin::Genesis);
    Ok(SessionState {
        role,
        params,
        basis_key,
        genesis_reserve: None,
        harvested: Vec::new(),
        ledger: LeakageLedger::new(leak.length_limit, options.max_budget),
        shuffle,
        cycle: 0,
        in_flight: None,
    })
}

impl SessionState {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> &NoiseParams {
        &self.params
    }

    pub fn ledger(&self) -> &LeakageLedger {
        &self.ledger
    }

    pub fn shuffle(&self) -> &ShuffleConfig {
        &self.shuffle
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn basis_key(&self) -> &KeyBuffer {
        &self.basis_key
    }

    pub fn harvested(&self) -> &[KeyBuffer] {
        &self.harvested
    }

    pub fn is_sender(&self) -> bool {
        self.role.sends_on(self.cycle)
    }

    pub fn batch_in_flight(&self) -> Option<usize> {
        self.in_flight
    }

    /// Largest batch the basis key alone can carry next cycle.
    pub fn basis_capacity(&self) -> usize {
        // While the basis is the genesis key, control bits come off its back.
        let control = if self.basis_key.origin() == KeyOrigin::Genesis {
            let selector = if self.shuffle.is_enabled() { self.shuffle.selector_bits() as usize } else { 0 };
            selector + DISCARD_SEED_BITS
        } else {
            0
        };
        self.basis_key.remaining().saturating_sub(control)
    }

    /// Largest batch the next cycle can carry: bounded by the basis key
    /// and by the ledger.
    pub fn max_batch(&self) -> usize {
        self.basis_capacity().min(self.ledger.remaining() as usize)
    }

    /// Overrides the ledger, e.g. to pin an externally agreed budget.
    pub fn set_ledger(&mut self, ledger: LeakageLedger) {
        self.ledger = ledger;
    }

    /// Encodes `count` fresh PhRG bits for the peer.
    pub fn produce_batch(
        &mut self,
        count: usize,
        entropy: &mut impl EntropyStream,
    ) -> Result<ProducedBatch, ProtocolError> {
        self.check_turn(true)?;
        let mut next = self.clone();
        let fresh = physics::phrg_bits(count, entropy)?;
        let batch = next.encode_fresh(fresh, entropy)?;
        *self = next;
        Ok(batch)
    }

    /// Like [`produce_batch`](Self::produce_batch) but with caller-chosen
    /// fresh bits. Used to replay a batch under different noise.
    pub fn produce_batch_with_bits(
        &mut self,
        fresh: KeyBuffer,
        entropy: &mut impl EntropyStream,
    ) -> Result<ProducedBatch, ProtocolError> {
        self.check_turn(true)?;
        let mut next = self.clone();
        let batch = next.encode_fresh(fresh, entropy)?;
        *self = next;
        Ok(batch)
    }

    fn encode_fresh(
        &mut self,
        mut fresh: KeyBuffer,
        entropy: &mut impl EntropyStream,
    ) -> Result<ProducedBatch, ProtocolError> {
        let count = fresh.len();
        fresh.set_origin(KeyOrigin::Fresh);
        let (perm, selector, bases) = self.open_batch(count)?;
        let data_bits = match &perm {
            Some(perm) => shuffle::apply(perm, fresh.bits()),
            None => fresh.bits().to_vec(),
        };
        let samples = data_bits
            .iter()
            .zip(&bases)
            .map(|(&bit, &basis)| physics::record_emission(bit, basis, &self.params, entropy))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProducedBatch {
            cycle: self.cycle,
            samples,
            pending_key: fresh,
            truth: BatchTruth { data_bits, bases, selector },
        })
    }

    /// Decodes a batch from the peer and undoes the shuffle.
    pub fn consume_batch(&mut self, samples: &[PhaseSample]) -> Result<KeyBuffer, ProtocolError> {
        self.consume_batch_with_truth(samples).map(|(key, _)| key)
    }

    /// Like [`consume_batch`](Self::consume_batch), also returning the
    /// receiver's view of the batch (decoded wire-order bits, bases used).
    pub fn consume_batch_with_truth(&mut self, samples: &[PhaseSample]) -> Result<(KeyBuffer, BatchTruth), ProtocolError> {
        self.check_turn(false)?;
        let mut next = self.clone();
        let (perm, selector, bases) = next.open_batch(samples.len())?;
        let decoded: Vec<Bit> = samples
            .iter()
            .zip(&bases)
            .map(|(&s, &basis)| physics::decode_with_basis(s, basis, &next.params))
            .collect();
        let bits = match &perm {
            Some(perm) => shuffle::unapply(perm, &decoded),
            None => decoded.clone(),
        };
        *self = next;
        Ok((KeyBuffer::new(bits, KeyOrigin::Fresh), BatchTruth { data_bits: decoded, bases, selector }))
    }

    fn check_turn(&self, sending: bool) -> Result<(), ProtocolError> {
        if self.in_flight.is_some() {
            return Err(ProtocolError::BatchInFlight);
        }
        if self.is_sender() != sending {
            return Err(ProtocolError::NotOurTurn(self.cycle));
        }
        Ok(())
    }

    // Charges the ledger and consumes selector and basis bits for a batch
    // of `count` emissions. Empty batches touch nothing.
    fn open_batch(&mut self, count: usize) -> Result<(Option<Vec<usize>>, Option<u64>, Vec<Bit>), ProtocolError> {
        if count == 0 {
            return Ok((None, None, Vec::new()));
        }
        self.ledger.check(count)?;
        let basis_short = |available: usize| ProtocolError::RekeyNeeded {
            reason: RekeyReason::BasisExhausted,
            requested: count,
            available,
        };
        if self.basis_key.remaining() < count {
            return Err(basis_short(self.basis_key.remaining()));
        }
        let control_short = |e: ProtocolError| match e {
            ProtocolError::KeyStarvation { available, .. } => ProtocolError::RekeyNeeded {
                reason: RekeyReason::ControlExhausted,
                requested: count,
                available,
            },
            other => other,
        };
        let (perm, selector) = if self.shuffle.is_enabled() {
            shuffle::check_length(count)?;
            let bits = self.draw_control(self.shuffle.selector_bits() as usize).map_err(control_short)?;
            let selector = bits_to_u64(&bits);
            (Some(shuffle::select_permutation(selector, self.shuffle.list_seed(), count)), Some(selector))
        } else {
            (None, None)
        };
        let available = self.basis_key.remaining();
        let bases = self.basis_key.take(count).ok_or_else(|| basis_short(available))?.to_vec();
        // The rotation that closes this cycle must be able to seed its discard.
        if self.ledger.discard_count(count) > 0 {
            self.clone().draw_control(DISCARD_SEED_BITS).map_err(control_short)?;
        }
        self.ledger.charge(count)?;
        self.in_flight = Some(count);
        Ok((perm, selector, bases))
    }

    /// Control bits come from the back of the genesis key while it lasts,
    /// then from the front of the harvested pool.
    fn draw_control(&mut self, count: usize) -> Result<Vec<Bit>, ProtocolError> {
        let genesis = match self.genesis_reserve.as_mut() {
            Some(reserve) => reserve,
            None => &mut self.basis_key,
        };
        if let Some(bits) = genesis.take_back(count) {
            return Ok(bits.to_vec());
        }
        self.draw_harvested(count)
    }

    /// All-or-nothing draw from the harvested pool, oldest key first.
    pub(crate) fn draw_harvested(&mut self, count: usize) -> Result<Vec<Bit>, ProtocolError> {
        let available = self.harvested_unspent();
        if available < count {
            return Err(ProtocolError::KeyStarvation { needed: count, available });
        }
        let mut out = Vec::with_capacity(count);
        for key in &mut self.harvested {
            let want = (count - out.len()).min(key.remaining());
            out.extend_from_slice(key.take(want).expect("checked above"));
            if out.len() == count {
                break;
            }
        }
        Ok(out)
    }

    pub fn harvested_unspent(&self) -> usize {
        self.harvested.iter().map(KeyBuffer::remaining).sum()
    }

    /// Unspent harvested bits as one buffer, for export to a key file.
    pub fn export_unspent(&self) -> KeyBuffer {
        let bits = self.harvested.iter().flat_map(|k| k.unspent().iter().copied()).collect();
        KeyBuffer::new(bits, KeyOrigin::Imported)
    }

    /// Completes a cycle: discards `⌈len/L⌉` bits of the agreed key, makes
    /// the remainder the next basis key and harvests it.
    pub fn rotate(&mut self, new_key: KeyBuffer) -> Result<(), ProtocolError> {
        match self.in_flight {
            Some(len) if len == new_key.len() => {}
            _ => return Err(ProtocolError::RotationOutOfOrder),
        }
        let mut next = self.clone();
        let discard = next.ledger.discard_count(new_key.len());
        let seed = if discard > 0 { next.draw_control(DISCARD_SEED_BITS)? } else { Vec::new() };
        let mut trimmed = apply_discard(&new_key, &mut next.ledger, &seed)?;
        trimmed.set_origin(KeyOrigin::Cycle(next.cycle + 1));
        let previous = std::mem::replace(&mut next.basis_key, trimmed.clone());
        if previous.origin() == KeyOrigin::Genesis {
            next.genesis_reserve = Some(previous);
        }
        next.harvested.push(trimmed);
        next.cycle += 1;
        next.in_flight = None;
        *self = next;
        Ok(())
    }
}

/// Drops `⌈len/L⌉` bits at positions derived from `shared_secret_bits`.
/// Both parties get identical output from identical inputs.
pub fn apply_discard(
    key: &KeyBuffer,
    ledger: &mut LeakageLedger,
    shared_secret_bits: &[Bit],
) -> Result<KeyBuffer, ProtocolError> {
    let count = ledger.discard_count(key.len());
    if count == 0 {
        return Ok(key.clone());
    }
    if shared_secret_bits.len() < DISCARD_SEED_BITS {
        return Err(ProtocolError::InsufficientSecret { needed: DISCARD_SEED_BITS, got: shared_secret_bits.len() });
    }
    let mut hasher = Sha256::new();
    hasher.update(b"notp/discard/v1");
    hasher.update(pack_bits(shared_secret_bits));
    hasher.update((shared_secret_bits.len() as u64).to_le_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());
    let mut drop = vec![false; key.len()];
    for pos in index::sample(&mut rng, key.len(), count) {
        drop[pos] = true;
    }
    let kept = key.bits().iter().zip(&drop).filter(|(_, &d)| !d).map(|(&b, _)| b).collect();
    ledger.record_discard(count);
    Ok(KeyBuffer::new(kept, key.origin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{BoundedEntropy, SeededEntropy};
    use crate::physics::phrg_bits;

    fn params() -> NoiseParams {
        NoiseParams::from_exponent(100.0, 11).unwrap()
    }

    fn genesis(bits: usize, seed: u64) -> KeyBuffer {
        let mut key = phrg_bits(bits, &mut SeededEntropy::new(seed)).unwrap();
        key.set_origin(KeyOrigin::Genesis);
        key
    }

    fn pair(shuffle: ShuffleConfig) -> (SessionState, SessionState) {
        let k0 = genesis(1024, 1);
        let a = init_session(k0.clone(), params(), shuffle.clone(), Role::Initiator, InitOptions::default()).unwrap();
        let b = init_session(k0, params(), shuffle, Role::Responder, InitOptions::default()).unwrap();
        (a, b)
    }

    fn run_cycle(
        sender: &mut SessionState,
        receiver: &mut SessionState,
        count: usize,
        entropy: &mut SeededEntropy,
    ) -> Result<(), ProtocolError> {
        let batch = sender.produce_batch(count, entropy)?;
        let recovered = receiver.consume_batch(&batch.samples)?;
        assert_eq!(recovered, batch.pending_key);
        sender.rotate(batch.pending_key)?;
        receiver.rotate(recovered)?;
        Ok(())
    }

    #[test]
    fn init_budget_and_preconditions() {
        let (a, _) = pair(ShuffleConfig::disabled());
        assert_eq!(a.ledger().budget(), 1301);
        assert_eq!(a.basis_key().origin(), KeyOrigin::Genesis);
        let short = init_session(genesis(63, 1), params(), ShuffleConfig::disabled(), Role::Initiator, InitOptions::default());
        assert_eq!(short.unwrap_err(), ProtocolError::KeyTooShort(63));
        let bad = NoiseParams::from_radians(2.0, 0.5).unwrap();
        let err = init_session(genesis(64, 1), bad, ShuffleConfig::disabled(), Role::Initiator, InitOptions::default());
        assert!(matches!(err, Err(ProtocolError::ConditionFailed(_))));
        let opts = InitOptions { allow_unsafe: true, ..InitOptions::default() };
        assert!(init_session(genesis(64, 1), bad, ShuffleConfig::disabled(), Role::Initiator, opts).is_ok());
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let (mut a, mut b) = pair(ShuffleConfig::disabled());
        let mut src = SeededEntropy::new(3);
        let batch = a.produce_batch(0, &mut src).unwrap();
        assert!(batch.samples.is_empty());
        assert_eq!(a.ledger().emitted(), 0);
        assert_eq!(a.batch_in_flight(), None);
        assert!(b.consume_batch(&[]).unwrap().is_empty());
        assert_eq!(b.ledger().emitted(), 0);
    }

    #[test]
    fn loopback_recovers_pending_key() {
        let k0 = genesis(10_000 + DISCARD_SEED_BITS, 4);
        let opts = InitOptions::default();
        let mut a = init_session(k0.clone(), params(), ShuffleConfig::disabled(), Role::Initiator, opts).unwrap();
        let mut b = init_session(k0, params(), ShuffleConfig::disabled(), Role::Responder, opts).unwrap();
        let ledger = LeakageLedger::with_budget(1 << 20);
        a.set_ledger(ledger.clone());
        b.set_ledger(ledger);
        let batch = a.produce_batch(10_000, &mut SeededEntropy::new(5)).unwrap();
        let got = b.consume_batch(&batch.samples).unwrap();
        assert_eq!(got.mismatches(&batch.pending_key), 0);
    }

    #[test]
    fn wrong_basis_key_gives_coin_flips() {
        let opts = InitOptions::default();
        let mut a = init_session(genesis(10_000 + DISCARD_SEED_BITS, 6), params(), ShuffleConfig::disabled(), Role::Initiator, opts).unwrap();
        let mut b = init_session(genesis(10_000 + DISCARD_SEED_BITS, 7), params(), ShuffleConfig::disabled(), Role::Responder, opts).unwrap();
        let ledger = LeakageLedger::with_budget(1 << 20);
        a.set_ledger(ledger.clone());
        b.set_ledger(ledger);
        let batch = a.produce_batch(10_000, &mut SeededEntropy::new(8)).unwrap();
        let got = b.consume_batch(&batch.samples).unwrap();
        let rate = got.mismatches(&batch.pending_key) as f64 / 10_000.0;
        // 99% Wilson-scale band around 0.5 for 10^4 trials.
        assert!((rate - 0.5).abs() < 0.013, "{rate}");
    }

    #[test]
    fn chain_rotates_and_harvests() {
        for shuffle in [ShuffleConfig::disabled(), ShuffleConfig::enabled(32, [3; 32]).unwrap()] {
            let (mut a, mut b) = pair(shuffle);
            let mut src = SeededEntropy::new(9);
            run_cycle(&mut a, &mut b, 256, &mut src).unwrap();
            assert_eq!(a.basis_key().origin(), KeyOrigin::Cycle(1));
            assert_eq!(a.cycle(), 1);
            // One bit discarded: ⌈256 / 1301.18⌉ = 1.
            assert_eq!(a.basis_key().len(), 255);
            assert_eq!(a.ledger().discarded(), 1);
            run_cycle(&mut b, &mut a, 255, &mut src).unwrap();
            let origins: Vec<_> = a.harvested().iter().map(KeyBuffer::origin).collect();
            assert_eq!(origins, vec![KeyOrigin::Cycle(1), KeyOrigin::Cycle(2)]);
            assert_eq!(a.harvested(), b.harvested());
            assert_eq!(a.basis_key().len(), 254);
            assert_eq!(a.max_batch(), 254);
        }
    }

    #[test]
    fn ledger_stops_the_chain_at_the_budget() {
        let (mut a, mut b) = pair(ShuffleConfig::enabled(32, [1; 32]).unwrap());
        let mut src = SeededEntropy::new(10);
        let mut sizes = Vec::new();
        loop {
            let (sender, receiver) = if a.is_sender() { (&mut a, &mut b) } else { (&mut b, &mut a) };
            let count = 256.min(sender.basis_key().remaining());
            match run_cycle(sender, receiver, count, &mut src) {
                Ok(()) => sizes.push(count),
                Err(ProtocolError::RekeyNeeded { reason: RekeyReason::BudgetExhausted, .. }) => break,
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(sizes, vec![256, 255, 254, 253, 252]);
        assert_eq!(a.ledger().emitted(), 1270);
        assert_eq!(b.ledger().emitted(), 1270);
        assert!(a.ledger().emitted() <= a.ledger().budget());
        let raw: usize = a.harvested().iter().map(KeyBuffer::len).sum();
        assert!(raw > 1000);
        assert_eq!(a.harvested(), b.harvested());
        let emitted = a.ledger().emitted() as f64;
        assert!(a.ledger().discarded() as f64 >= (emitted / a.ledger().length_limit()).ceil());
    }

    #[test]
    fn failed_produce_leaves_state_untouched() {
        let (mut a, _) = pair(ShuffleConfig::disabled());
        let before = a.clone();
        let mut dry = BoundedEntropy::new(SeededEntropy::new(1), 100);
        assert!(matches!(a.produce_batch(256, &mut dry), Err(ProtocolError::Entropy(_))));
        assert_eq!(a.ledger(), before.ledger());
        assert_eq!(a.basis_key(), before.basis_key());
        assert_eq!(a.batch_in_flight(), None);
        let err = a.produce_batch(2000, &mut SeededEntropy::new(1)).unwrap_err();
        assert!(matches!(err, ProtocolError::RekeyNeeded { reason: RekeyReason::BudgetExhausted, .. }));
        a.set_ledger(LeakageLedger::with_budget(1 << 20));
        let err = a.produce_batch(2000, &mut SeededEntropy::new(1)).unwrap_err();
        assert!(matches!(err, ProtocolError::RekeyNeeded { reason: RekeyReason::BasisExhausted, .. }));
    }

    #[test]
    fn turn_and_rotation_order() {
        let (mut a, mut b) = pair(ShuffleConfig::disabled());
        let mut src = SeededEntropy::new(2);
        assert_eq!(b.produce_batch(8, &mut src).unwrap_err(), ProtocolError::NotOurTurn(0));
        assert_eq!(
            a.rotate(KeyBuffer::empty(KeyOrigin::Fresh)).unwrap_err(),
            ProtocolError::RotationOutOfOrder
        );
        let batch = a.produce_batch(8, &mut src).unwrap();
        assert_eq!(a.produce_batch(8, &mut src).unwrap_err(), ProtocolError::BatchInFlight);
        let short = KeyBuffer::from_bools([true; 7], KeyOrigin::Fresh);
        assert_eq!(a.rotate(short).unwrap_err(), ProtocolError::RotationOutOfOrder);
        let got = b.consume_batch(&batch.samples).unwrap();
        a.rotate(batch.pending_key).unwrap();
        b.rotate(got).unwrap();
    }

    #[test]
    fn shuffle_changes_wire_order_only() {
        let (mut a, mut b) = pair(ShuffleConfig::enabled(16, [9; 32]).unwrap());
        let batch = a.produce_batch(200, &mut SeededEntropy::new(12)).unwrap();
        assert!(batch.truth.selector.unwrap() < 1 << 16);
        assert_ne!(batch.truth.data_bits, batch.pending_key.bits());
        assert_eq!(b.consume_batch(&batch.samples).unwrap(), batch.pending_key);
    }

    #[test]
    fn discard_is_deterministic_and_sized() {
        let key = phrg_bits(1295, &mut SeededEntropy::new(13)).unwrap();
        let seed: Vec<Bit> = phrg_bits(32, &mut SeededEntropy::new(14)).unwrap().into_bits();
        let mut l1 = LeakageLedger::new(1295.8, DEFAULT_MAX_BUDGET);
        let mut l2 = l1.clone();
        let a = apply_discard(&key, &mut l1, &seed).unwrap();
        let b = apply_discard(&key, &mut l2, &seed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1294);
        assert_eq!(l1.discarded(), 1);
        let mut inf = LeakageLedger::new(f64::INFINITY, DEFAULT_MAX_BUDGET);
        assert_eq!(apply_discard(&key, &mut inf, &[]).unwrap(), key);
        let err = apply_discard(&key, &mut l1, &seed[..31]).unwrap_err();
        assert_eq!(err, ProtocolError::InsufficientSecret { needed: 32, got: 31 });
    }

    #[test]
    fn infinite_budget_is_clamped() {
        let opts = InitOptions { max_budget: 4096, ..InitOptions::default() };
        let mut s = init_session(genesis(64, 1), params(), ShuffleConfig::disabled(), Role::Initiator, opts).unwrap();
        assert_eq!(s.ledger().budget(), 1301);
        s.set_ledger(LeakageLedger::new(f64::INFINITY, 4096));
        assert_eq!(s.ledger().budget(), 4096);
    }
}
