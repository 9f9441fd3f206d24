//! Phase encoding of bits in two non-orthogonal bases.
//!
//! A bit is carried by the phase of a coherent light field. Basis `k = 0`
//! puts bit 0 at phase 0 and bit 1 at π; basis `k = 1` shifts both by π + Δφ,
//! so bit 1 lands at Δφ and bit 0 at π + Δφ. Within a basis the two
//! codewords are π apart; across bases the close pairs are only Δφ apart.
//!
//! Gaussian phase noise of width σ_φ = √(2/⟨n⟩) is added before the phase is
//! quantized on a fixed `2^adc_bits` grid. The quantized ("recorded") sample
//! is what travels the open channel.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::entropy::EntropyStream;
use crate::error::{EntropyError, ParamError};
use crate::keys::{Bit, KeyBuffer, KeyOrigin};

pub const DEFAULT_ADC_BITS: u32 = 16;
pub const DEFAULT_GUARD_RATIO: f64 = 5.0;
pub const MIN_ADC_BITS: u32 = 8;
pub const MAX_ADC_BITS: u32 = 24;

/// How the basis spacing was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPhi {
    /// Δφ = 2^-m radians.
    Exponent(i8),
    /// Free-form radians.
    Radians(f64),
}

impl DeltaPhi {
    pub fn radians(self) -> f64 {
        match self {
            DeltaPhi::Exponent(m) => 2f64.powi(-(m as i32)),
            DeltaPhi::Radians(r) => r,
        }
    }
}

/// Physical channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    mean_photon_number: f64,
    delta_phi: DeltaPhi,
    adc_bits: u32,
    guard_ratio: f64,
}

impl NoiseParams {
    pub fn new(mean_photon_number: f64, delta_phi: DeltaPhi, adc_bits: u32) -> Result<Self, ParamError> {
        Self::with_guard(mean_photon_number, delta_phi, adc_bits, DEFAULT_GUARD_RATIO)
    }

    pub fn with_guard(
        mean_photon_number: f64,
        delta_phi: DeltaPhi,
        adc_bits: u32,
        guard_ratio: f64,
    ) -> Result<Self, ParamError> {
        let params = Self { mean_photon_number, delta_phi, adc_bits, guard_ratio };
        params.validate()?;
        Ok(params)
    }

    /// Δφ = 2^-m radians at the default 16-bit grid.
    pub fn from_exponent(mean_photon_number: f64, m: i8) -> Result<Self, ParamError> {
        Self::new(mean_photon_number, DeltaPhi::Exponent(m), DEFAULT_ADC_BITS)
    }

    /// Free-form Δφ in radians at the default 16-bit grid.
    pub fn from_radians(mean_photon_number: f64, delta_phi: f64) -> Result<Self, ParamError> {
        Self::new(mean_photon_number, DeltaPhi::Radians(delta_phi), DEFAULT_ADC_BITS)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let n = self.mean_photon_number;
        // +inf is the noiseless limit and is allowed.
        if n.is_nan() || n <= 1.0 {
            return Err(ParamError::PhotonNumber(n));
        }
        let dphi = self.delta_phi();
        if !(dphi > 0.0 && dphi < FRAC_PI_2) {
            return Err(ParamError::DeltaPhi(dphi));
        }
        if !(MIN_ADC_BITS..=MAX_ADC_BITS).contains(&self.adc_bits) {
            return Err(ParamError::AdcBits(self.adc_bits));
        }
        let grid = self.grid_spacing();
        if grid >= dphi / 4.0 {
            return Err(ParamError::GridTooCoarse { grid, delta_phi: dphi });
        }
        if !(self.guard_ratio.is_finite() && self.guard_ratio > 0.0) {
            return Err(ParamError::GuardRatio(self.guard_ratio));
        }
        Ok(())
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi.radians()
    }

    pub fn delta_phi_spec(&self) -> DeltaPhi {
        self.delta_phi
    }

    pub fn adc_bits(&self) -> u32 {
        self.adc_bits
    }

    pub fn guard_ratio(&self) -> f64 {
        self.guard_ratio
    }

    pub fn grid_levels(&self) -> u32 {
        1 << self.adc_bits
    }

    pub fn grid_spacing(&self) -> f64 {
        TAU / self.grid_levels() as f64
    }
}

/// One quantized phase on the `2^adc_bits` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseSample {
    grid_index: u32,
}

impl PhaseSample {
    /// Fails when the index is off the grid for `adc_bits`.
    pub fn new(grid_index: u32, adc_bits: u32) -> Option<Self> {
        (grid_index < (1u32 << adc_bits)).then_some(Self { grid_index })
    }

    /// Rounds an arbitrary phase to the nearest grid level, wrapping at 2π.
    pub fn quantize(phase: f64, adc_bits: u32) -> Self {
        let levels = 1u64 << adc_bits;
        let scaled = (wrap_phase(phase) / TAU * levels as f64).round() as u64;
        Self { grid_index: (scaled % levels) as u32 }
    }

    pub fn grid_index(self) -> u32 {
        self.grid_index
    }

    pub fn dequantize(self, adc_bits: u32) -> f64 {
        TAU * self.grid_index as f64 / (1u64 << adc_bits) as f64
    }
}

/// A recorded emission together with what produced it. Only `sample` is
/// ever put on the wire; the rest is ground truth for harnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub data_bit: Bit,
    pub basis: Bit,
    pub sample: PhaseSample,
}

/// Reduces a phase into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest angular distance between two phases, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

/// Standard deviation of coherent-state phase noise, √(2/⟨n⟩).
pub fn sigma_phi(params: &NoiseParams) -> f64 {
    sigma_for(params.mean_photon_number())
}

pub(crate) fn sigma_for(mean_photon_number: f64) -> f64 {
    (2.0 / mean_photon_number).sqrt()
}

/// Noise-free codeword phase for `bit` in `basis`, in `[0, 2π)`.
pub fn ideal_phase(bit: Bit, basis: Bit, params: &NoiseParams) -> f64 {
    codeword(bit, basis, params.delta_phi())
}

pub(crate) fn codeword(bit: Bit, basis: Bit, delta_phi: f64) -> f64 {
    let k = basis.as_u8() as f64;
    let offset = k * delta_phi + PI * k;
    wrap_phase(offset + PI * bit.as_u8() as f64)
}

/// One draw of zero-mean Gaussian phase noise with width σ_φ.
pub fn sample_noise(params: &NoiseParams, entropy: &mut impl EntropyStream) -> Result<f64, EntropyError> {
    let sigma = sigma_phi(params);
    let z = entropy.standard_normal()?;
    Ok(if sigma == 0.0 { 0.0 } else { sigma * z })
}

/// Encodes, adds noise, and quantizes one bit.
pub fn record_emission(
    bit: Bit,
    basis: Bit,
    params: &NoiseParams,
    entropy: &mut impl EntropyStream,
) -> Result<PhaseSample, EntropyError> {
    let phase = ideal_phase(bit, basis, params) + sample_noise(params, entropy)?;
    Ok(PhaseSample::quantize(phase, params.adc_bits()))
}

/// Nearest-codeword decision in a known basis. Exact midpoints go to bit 0.
pub fn decode_with_basis(sample: PhaseSample, basis: Bit, params: &NoiseParams) -> Bit {
    let theta = sample.dequantize(params.adc_bits());
    let d0 = circular_distance(theta, ideal_phase(Bit::ZERO, basis, params));
    let d1 = circular_distance(theta, ideal_phase(Bit::ONE, basis, params));
    Bit::from(d1 < d0)
}

/// `count` independent unbiased bits from the entropy source.
pub fn phrg_bits(count: usize, entropy: &mut impl EntropyStream) -> Result<KeyBuffer, EntropyError> {
    let mut bytes = vec![0u8; count.div_ceil(8)];
    entropy.try_fill(&mut bytes)?;
    Ok(KeyBuffer::from_packed(&bytes, count, KeyOrigin::Fresh))
}

/// Squared overlap |⟨ψ₀|ψ₁⟩|² of the two close coherent states.
///
/// `exact` gives e^{-2⟨n⟩(1 - cos(Δφ/2))}; otherwise the small-angle form
/// e^{-⟨n⟩Δφ²/4}.
pub fn state_overlap(params: &NoiseParams, exact: bool) -> f64 {
    overlap_for(params.mean_photon_number(), params.delta_phi(), exact)
}

pub fn overlap_for(mean_photon_number: f64, delta_phi: f64, exact: bool) -> f64 {
    if delta_phi == 0.0 {
        return 1.0;
    }
    let exponent = if exact {
        // 1 - cos(x/2) = 2 sin²(x/4), which keeps precision for small Δφ.
        let s = (delta_phi / 4.0).sin();
        -2.0 * mean_photon_number * 2.0 * s * s
    } else {
        -mean_photon_number * delta_phi * delta_phi / 4.0
    };
    exponent.exp()
}

/// Un-normalized overlap probability p_u = e^{-Δφ²/(2σ_φ²)}.
pub fn overlap_probability(params: &NoiseParams) -> f64 {
    overlap_probability_for(sigma_phi(params), params.delta_phi())
}

pub fn overlap_probability_for(sigma: f64, delta_phi: f64) -> f64 {
    if delta_phi == 0.0 {
        return 1.0;
    }
    if sigma == 0.0 {
        return 0.0;
    }
    (-delta_phi * delta_phi / (2.0 * sigma * sigma)).exp()
}
