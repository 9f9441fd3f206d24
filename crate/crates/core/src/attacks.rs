//! Adversary simulators.
//!
//! Attack functions take only what an eavesdropper can see: recorded
//! samples from the wire, public parameters, and explicitly declared side
//! information (a known plaintext, a leaked selector). Ground truth is
//! passed to the scoring helpers separately and never to the attacker.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::thread;

use thiserror::Error;

use crate::analysis::{self, format_sig};
use crate::entropy::SeededEntropy;
use crate::keys::{Bit, KeyBuffer, KeyOrigin};
use crate::physics::{self, NoiseParams, PhaseSample};
use crate::protocol::{self, shuffle, InitOptions, ProtocolError, Role, ShuffleConfig};

/// Two-sided 99% standard normal quantile.
pub const Z_99_TWO_SIDED: f64 = 2.575_829_303_548_900_4;
/// One-sided 99% standard normal quantile.
pub const Z_99_ONE_SIDED: f64 = 2.326_347_874_040_841;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("plaintext is {plaintext} bytes but ciphertext is {ciphertext}")]
    LengthMismatch { plaintext: usize, ciphertext: usize },
    #[error("truth has {truth} entries for {observed} observations")]
    TruthMismatch { truth: usize, observed: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackOutcome {
    pub trials: u64,
    pub correct: u64,
    pub accuracy: f64,
    pub wilson_interval: (f64, f64),
}

impl AttackOutcome {
    pub fn new(trials: u64, correct: u64) -> Self {
        assert!(trials > 0 && correct <= trials, "invalid tally {correct}/{trials}");
        Self {
            trials,
            correct,
            accuracy: correct as f64 / trials as f64,
            wilson_interval: wilson_interval(correct, trials, Z_99_TWO_SIDED),
        }
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }

    pub fn merge(self, other: AttackOutcome) -> AttackOutcome {
        AttackOutcome::new(self.trials + other.trials, self.correct + other.correct)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.wilson_interval.0 <= p && p <= self.wilson_interval.1
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

// log of the wrapped normal density (up to a constant shared by all
// hypotheses) at angular offset `x`.
fn wrapped_log_density(x: f64, sigma: f64) -> f64 {
    let x = physics::wrap_phase(x);
    let terms = [x - TAU, x, x + TAU, x - 2.0 * TAU];
    log_sum_exp(terms.iter().map(|&d| -d * d / (2.0 * sigma * sigma)))
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-likelihood of bit `b` for a sample whose basis is unknown.
fn bit_log_likelihood(theta: f64, bit: Bit, params: &NoiseParams, sigma: f64) -> f64 {
    let a = wrapped_log_density(theta - physics::ideal_phase(bit, Bit::ZERO, params), sigma);
    let b = wrapped_log_density(theta - physics::ideal_phase(bit, Bit::ONE, params), sigma);
    log_sum_exp([a, b].into_iter())
}

/// The eavesdropper's maximum-likelihood bit for one recorded sample,
/// knowing the codebook and noise level but not the basis. Ties go to 0.
pub fn ml_guess(sample: PhaseSample, params: &NoiseParams) -> Bit {
    let sigma = physics::sigma_phi(params);
    let theta = sample.dequantize(params.adc_bits());
    if sigma == 0.0 {
        // Noiseless: the nearest of the four codewords identifies the bit.
        let best = [(Bit::ZERO, Bit::ZERO), (Bit::ONE, Bit::ONE), (Bit::ONE, Bit::ZERO), (Bit::ZERO, Bit::ONE)]
            .into_iter()
            .map(|(b, k)| (physics::circular_distance(theta, physics::ideal_phase(b, k, params)), b))
            .fold((f64::INFINITY, Bit::ZERO), |acc, cur| if cur.0 < acc.0 { cur } else { acc });
        return best.1;
    }
    let l0 = bit_log_likelihood(theta, Bit::ZERO, params, sigma);
    let l1 = bit_log_likelihood(theta, Bit::ONE, params, sigma);
    Bit::from(l1 > l0)
}

/// Scores [`ml_guess`] over recorded traffic against the hidden data bits.
pub fn eavesdrop_ml(samples: &[PhaseSample], truth: &[Bit], params: &NoiseParams) -> Result<AttackOutcome, AttackError> {
    if samples.len() != truth.len() || samples.is_empty() {
        return Err(AttackError::TruthMismatch { truth: truth.len(), observed: samples.len() });
    }
    let correct = samples.iter().zip(truth).filter(|(&s, &t)| ml_guess(s, params) == t).count();
    Ok(AttackOutcome::new(samples.len() as u64, correct as u64))
}

/// Fresh random emissions scored against the eavesdropper, split over
/// `workers` threads. Worker `i` uses sub-stream `i` of `seed`, so the tally
/// does not depend on scheduling.
pub fn eavesdrop_experiment(params: &NoiseParams, trials: u64, seed: u64, workers: usize) -> AttackOutcome {
    let workers = workers.max(1) as u64;
    let per = trials.div_ceil(workers);
    let correct: u64 = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let n = per.min(trials.saturating_sub(w * per));
                scope.spawn(move || {
                    let mut src = SeededEntropy::substream(seed, w);
                    let mut ok = 0u64;
                    for _ in 0..n {
                        let bits = physics::phrg_bits(2, &mut src).expect("seeded");
                        let (bit, basis) = (bits.bits()[0], bits.bits()[1]);
                        let s = physics::record_emission(bit, basis, params, &mut src).expect("seeded");
                        ok += (ml_guess(s, params) == bit) as u64;
                    }
                    ok
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).sum()
    });
    AttackOutcome::new(trials, correct)
}

/// Basis guess for a block of emissions that share one basis bit, with the
/// posterior probability of the guess.
pub fn estimate_basis_block(block: &[PhaseSample], params: &NoiseParams) -> (Bit, f64) {
    let sigma = physics::sigma_phi(params);
    let llr: f64 = block
        .iter()
        .map(|s| {
            let theta = s.dequantize(params.adc_bits());
            let under = |k: Bit| {
                let a = wrapped_log_density(theta - physics::ideal_phase(Bit::ZERO, k, params), sigma);
                let b = wrapped_log_density(theta - physics::ideal_phase(Bit::ONE, k, params), sigma);
                log_sum_exp([a, b].into_iter())
            };
            under(Bit::ONE) - under(Bit::ZERO)
        })
        .sum();
    let guess = Bit::from(llr > 0.0);
    let confidence = 1.0 / (1.0 + (-llr.abs()).exp());
    (guess, confidence)
}

/// Accuracy of [`estimate_basis_block`] over `trials` random blocks.
pub fn basis_block_experiment(params: &NoiseParams, block_len: usize, trials: u64, seed: u64, workers: usize) -> AttackOutcome {
    let workers = workers.max(1) as u64;
    let per = trials.div_ceil(workers);
    let correct: u64 = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let n = per.min(trials.saturating_sub(w * per));
                scope.spawn(move || {
                    let mut src = SeededEntropy::substream(seed, w);
                    let mut ok = 0u64;
                    let mut block = Vec::with_capacity(block_len);
                    for _ in 0..n {
                        let basis = physics::phrg_bits(1, &mut src).expect("seeded").bits()[0];
                        let data = physics::phrg_bits(block_len, &mut src).expect("seeded");
                        block.clear();
                        for &bit in data.bits() {
                            block.push(physics::record_emission(bit, basis, params, &mut src).expect("seeded"));
                        }
                        ok += (estimate_basis_block(&block, params).0 == basis) as u64;
                    }
                    ok
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).sum()
    });
    AttackOutcome::new(trials, correct)
}

/// Gaussian-mean-shift reference for [`basis_block_experiment`]: with N
/// samples the basis offset Δφ is resolved with probability 1 − Q(Δφ√N/(2σ)).
pub fn basis_block_reference(params: &NoiseParams, block_len: usize) -> f64 {
    let sigma = physics::sigma_phi(params);
    1.0 - analysis::normal_q(params.delta_phi() * (block_len as f64).sqrt() / (2.0 * sigma))
}

/// Side information a known-plaintext attacker may hold about the shuffle.
#[derive(Debug, Clone)]
pub struct LeakedSelector {
    pub selector: u64,
    pub list_seed: [u8; 32],
}

/// What the known-plaintext attacker sees.
#[derive(Debug, Clone)]
pub struct KpaInput<'a> {
    pub params: NoiseParams,
    /// Recorded samples of the batch whose basis is `K₁` (it carries `K₂`).
    pub y2: &'a [PhaseSample],
    pub known_plaintext: &'a [u8],
    /// One-time-pad ciphertext of the plaintext under `K₁`.
    pub ciphertext: &'a [u8],
    pub leaked_selector: Option<LeakedSelector>,
}

#[derive(Debug, Clone)]
pub struct KpaRecovery {
    /// `ciphertext ⊕ plaintext`, the prefix of `K₁` consumed by the pad.
    pub k1: Vec<Bit>,
    /// Attacker's view of `K₂`; `None` where the basis bit is unknown.
    pub k2: Vec<Option<Bit>>,
}

/// Chain attack: recover `K₁` from a known plaintext, then decode the next
/// batch with `K₁` as the basis key. With a leaked selector the shuffle is
/// undone; without it the attacker reads the bits in wire order.
pub fn run_kpa(input: &KpaInput<'_>) -> Result<KpaRecovery, AttackError> {
    if input.known_plaintext.len() != input.ciphertext.len() {
        return Err(AttackError::LengthMismatch {
            plaintext: input.known_plaintext.len(),
            ciphertext: input.ciphertext.len(),
        });
    }
    let pad: Vec<u8> = input.known_plaintext.iter().zip(input.ciphertext).map(|(p, c)| p ^ c).collect();
    let k1 = KeyBuffer::from_packed(&pad, pad.len() * 8, KeyOrigin::Fresh).into_bits();
    let decoded: Vec<Option<Bit>> = input
        .y2
        .iter()
        .enumerate()
        .map(|(j, &s)| k1.get(j).map(|&basis| physics::decode_with_basis(s, basis, &input.params)))
        .collect();
    let k2 = match &input.leaked_selector {
        Some(leak) if decoded.len() >= 2 => {
            let perm = shuffle::select_permutation(leak.selector, &leak.list_seed, decoded.len());
            shuffle::unapply(&perm, &decoded)
        }
        _ => decoded,
    };
    Ok(KpaRecovery { k1, k2 })
}

/// Scores recovered bits against the truth over the positions the attacker
/// committed to. `None` when nothing was recovered.
pub fn score_recovery(recovered: &[Option<Bit>], truth: &[Bit]) -> Result<Option<AttackOutcome>, AttackError> {
    if recovered.len() != truth.len() {
        return Err(AttackError::TruthMismatch { truth: truth.len(), observed: recovered.len() });
    }
    let (trials, correct) = recovered
        .iter()
        .zip(truth)
        .filter_map(|(r, t)| r.map(|r| r == *t))
        .fold((0u64, 0u64), |(n, c), ok| (n + 1, c + ok as u64));
    Ok((trials > 0).then(|| AttackOutcome::new(trials, correct)))
}

/// Configuration of one end-to-end known-plaintext experiment.
#[derive(Debug, Clone)]
pub struct KpaScenario {
    pub params: NoiseParams,
    pub genesis_bits: usize,
    pub batch: usize,
    pub shuffle: ShuffleConfig,
    pub leak_selector: bool,
}

#[derive(Debug, Clone)]
pub struct KpaReport {
    pub recovery: KpaRecovery,
    pub true_k1: Vec<Bit>,
    pub true_k2: Vec<Bit>,
    pub outcome: Option<AttackOutcome>,
}

/// Runs two real protocol cycles (A→B carrying `K₁`, B→A carrying `K₂`),
/// lets A encrypt a plaintext the attacker knows with the harvested `K₁`,
/// and mounts the chain attack on the recorded traffic.
pub fn kpa_experiment(scenario: &KpaScenario, seed: u64) -> Result<KpaReport, AttackError> {
    let mut src_a = SeededEntropy::substream(seed, 0);
    let mut src_b = SeededEntropy::substream(seed, 1);
    let mut genesis = physics::phrg_bits(scenario.genesis_bits, &mut SeededEntropy::substream(seed, 2))
        .map_err(ProtocolError::from)?;
    genesis.set_origin(KeyOrigin::Genesis);
    let opts = InitOptions::default();
    let mut a = protocol::init_session(genesis.clone(), scenario.params, scenario.shuffle.clone(), Role::Initiator, opts)?;
    let mut b = protocol::init_session(genesis, scenario.params, scenario.shuffle.clone(), Role::Responder, opts)?;

    let first = a.produce_batch(scenario.batch, &mut src_a)?;
    let k1_at_b = b.consume_batch(&first.samples)?;
    a.rotate(first.pending_key)?;
    b.rotate(k1_at_b)?;

    let count = scenario.batch.min(b.max_batch());
    let second = b.produce_batch(count, &mut src_b)?;
    let k2_at_a = a.consume_batch(&second.samples)?;
    b.rotate(second.pending_key.clone())?;
    a.rotate(k2_at_a)?;

    let true_k1 = a.harvested()[0].bits().to_vec();
    let plaintext = known_plaintext(true_k1.len() / 8);
    let ciphertext = protocol::otp_encrypt(&plaintext, &mut a)?;

    let leaked_selector = if scenario.leak_selector {
        second.truth.selector.map(|selector| LeakedSelector { selector, list_seed: *scenario.shuffle.list_seed() })
    } else {
        None
    };
    let input = KpaInput {
        params: scenario.params,
        y2: &second.samples,
        known_plaintext: &plaintext,
        ciphertext: &ciphertext,
        leaked_selector,
    };
    let recovery = run_kpa(&input)?;
    let true_k2 = second.pending_key.bits().to_vec();
    let outcome = score_recovery(&recovery.k2, &true_k2)?;
    Ok(KpaReport { recovery, true_k1, true_k2, outcome })
}

fn known_plaintext(len: usize) -> Vec<u8> {
    b"ATTACK AT DAWN. ".iter().copied().cycle().take(len).collect()
}

/// Sum of [`kpa_experiment`] outcomes over consecutive seeds until at least
/// `min_bits` key bits have been scored.
pub fn kpa_campaign(scenario: &KpaScenario, min_bits: u64, seed: u64) -> Result<AttackOutcome, AttackError> {
    let mut total: Option<AttackOutcome> = None;
    let mut run = 0u64;
    while total.map_or(0, |t| t.trials) < min_bits {
        let report = kpa_experiment(scenario, seed.wrapping_add(run))?;
        if let Some(outcome) = report.outcome {
            total = Some(total.map_or(outcome, |t| t.merge(outcome)));
        }
        run += 1;
        assert!(run < 10_000, "campaign is not scoring any bits");
    }
    Ok(total.expect("loop ran"))
}

pub const REPORT_CSV_HEADER: &str = "attack,params,trials,correct,accuracy,ci_low,ci_high,reference_value";

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub attack: String,
    pub params: String,
    pub outcome: AttackOutcome,
    pub reference_value: f64,
}

/// Parameter tag used in report rows: `n=..;dphi=..;adc=..`.
pub fn params_tag(params: &NoiseParams) -> String {
    format!(
        "n={};dphi={};adc={}",
        format_sig(params.mean_photon_number()),
        format_sig(params.delta_phi()),
        params.adc_bits()
    )
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let o = &row.outcome;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.attack,
            row.params,
            o.trials,
            o.correct,
            format_sig(o.accuracy),
            format_sig(o.wilson_interval.0),
            format_sig(o.wilson_interval.1),
            format_sig(row.reference_value)
        );
    }
    out
}
