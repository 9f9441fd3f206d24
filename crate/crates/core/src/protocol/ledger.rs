use super::{ProtocolError, RekeyReason};

/// Budget cap used when the length limit is infinite.
pub const DEFAULT_MAX_BUDGET: u64 = 1 << 32;

/// Emissions charged against one starting key.
///
/// Every emission in either direction since the genesis key counts. The
/// integer budget is `floor(L)`; a charge that would cross it is refused
/// before anything is emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageLedger {
    length_limit: f64,
    budget: u64,
    emitted: u64,
    discarded: u64,
}

impl LeakageLedger {
    pub fn new(length_limit: f64, max_budget: u64) -> Self {
        let budget = if length_limit.is_finite() {
            (length_limit.floor() as u64).min(max_budget)
        } else {
            max_budget
        };
        Self { length_limit, budget, emitted: 0, discarded: 0 }
    }

    /// Ledger with an explicit integer budget; the discard rate uses the
    /// same value as `L`.
    pub fn with_budget(budget: u64) -> Self {
        Self { length_limit: budget as f64, budget, emitted: 0, discarded: 0 }
    }

    pub fn length_limit(&self) -> f64 {
        self.length_limit
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.emitted
    }

    pub fn check(&self, count: usize) -> Result<(), ProtocolError> {
        if count as u64 > self.remaining() {
            return Err(ProtocolError::RekeyNeeded {
                reason: RekeyReason::BudgetExhausted,
                requested: count,
                available: self.remaining() as usize,
            });
        }
        Ok(())
    }

    pub fn charge(&mut self, count: usize) -> Result<(), ProtocolError> {
        self.check(count)?;
        self.emitted += count as u64;
        Ok(())
    }

    /// Bits to drop from a freshly agreed key of `len` bits: ⌈len / L⌉.
    pub fn discard_count(&self, len: usize) -> usize {
        if !self.length_limit.is_finite() || len == 0 {
            return 0;
        }
        ((len as f64 / self.length_limit).ceil() as usize).min(len)
    }

    pub(crate) fn record_discard(&mut self, count: usize) {
        self.discarded += count as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_boundary_is_exact() {
        let mut ledger = LeakageLedger::with_budget(1295);
        for _ in 0..5 {
            ledger.charge(256).unwrap();
        }
        assert_eq!(ledger.emitted(), 1280);
        let err = ledger.charge(256).unwrap_err();
        assert!(matches!(
            err,
            ProtocolError::RekeyNeeded { reason: RekeyReason::BudgetExhausted, requested: 256, available: 15 }
        ));
        assert_eq!(ledger.emitted(), 1280);
        ledger.charge(15).unwrap();
        assert_eq!(ledger.remaining(), 0);
        assert!(ledger.charge(1).is_err());
        ledger.charge(0).unwrap();
    }

    #[test]
    fn floor_of_length_limit() {
        let ledger = LeakageLedger::new(1301.18, DEFAULT_MAX_BUDGET);
        assert_eq!(ledger.budget(), 1301);
        let ledger = LeakageLedger::new(f64::INFINITY, DEFAULT_MAX_BUDGET);
        assert_eq!(ledger.budget(), 1 << 32);
        assert_eq!(ledger.discard_count(1 << 20), 0);
    }

    #[test]
    fn discard_arithmetic() {
        let ledger = LeakageLedger::new(1295.8, DEFAULT_MAX_BUDGET);
        assert_eq!(ledger.discard_count(1295), 1);
        assert_eq!(ledger.discard_count(1296), 2);
        assert_eq!(ledger.discard_count(256), 1);
        assert_eq!(ledger.discard_count(0), 0);
        assert_eq!(LeakageLedger::new(0.5, 10).discard_count(3), 3);
    }
}
