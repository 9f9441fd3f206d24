//! Noise-protected one-time-pad key expansion.
//!
//! Two parties that share a starting key `K₀` grow it into a much longer
//! stream of fresh key material. Each fresh bit is phase-encoded in one of
//! two nearly overlapping bases picked by the current shared key, buried in
//! recorded Gaussian phase noise, and sent in the clear. The peer, knowing
//! the basis, decodes it without error; an eavesdropper holding a perfect
//! copy of the traffic does not. The emission budget per starting key
//! follows from the attacker's residual error.
//!
//! Modules:
//! - [`physics`]: phase codebook, noise, quantization, decoding
//! - [`analysis`]: attacker error, entropy leak, length budget, sweeps
//! - [`protocol`]: chained key distribution, ledger, shuffle, OTP and MAC
//! - [`attacks`]: eavesdropper, basis-block estimator, known-plaintext chain attack
//! - [`net`]: wire framing and the two-party session driver
//! - [`keyfile`]: on-disk key format

pub mod analysis;
pub mod attacks;
pub mod entropy;
pub mod error;
pub mod keyfile;
pub mod keys;
pub mod net;
pub mod physics;
pub mod protocol;
pub mod transcript;

pub use entropy::{BoundedEntropy, EntropyStream, OsEntropy, SeededEntropy};
pub use error::{DomainError, EntropyError, ParamError};
pub use keys::{Bit, KeyBuffer, KeyOrigin};
pub use physics::{DeltaPhi, Emission, NoiseParams, PhaseSample};
pub use protocol::{LeakageLedger, ProtocolError, Role, SessionState, ShuffleConfig};
