use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntropyError {
    #[error("entropy source exhausted")]
    Exhausted,
    #[error("entropy source failed: {0}")]
    Source(String),
}

/// Violations of the [`NoiseParams`](crate::physics::NoiseParams) invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("mean photon number must exceed 1 (got {0})")]
    PhotonNumber(f64),
    #[error("basis spacing must lie in (0, pi/2) radians (got {0})")]
    DeltaPhi(f64),
    #[error("adc resolution must be 8..=24 bits (got {0})")]
    AdcBits(u32),
    #[error("phase grid spacing {grid:e} rad is not below a quarter of the basis spacing {delta_phi:e} rad")]
    GridTooCoarse { grid: f64, delta_phi: f64 },
    #[error("guard ratio must be positive and finite (got {0})")]
    GuardRatio(f64),
}

/// Arguments outside the mathematical domain of an analysis formula.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("state overlap must lie in [0, 1] (got {0})")]
    Overlap(f64),
    #[error("error probability must lie in [0, 1/2] (got {0})")]
    ErrorProbability(f64),
    #[error("entropy leak must lie in [1/2, 1] (got {0})")]
    EntropyLeak(f64),
    #[error("repetitions must be at least 1")]
    Repetitions,
}
