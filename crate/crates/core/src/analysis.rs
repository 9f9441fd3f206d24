//! Closed-form security analysis: attacker error, entropy leak per emission,
//! the emission budget per starting key, and the operating-condition check.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use statrs::function::erf::erfc;

use crate::error::{DomainError, ParamError};
use crate::physics::{self, DeltaPhi, NoiseParams};

/// Repetitions implied by the protocol: every bit is emitted once as data
/// and once more as the basis of the following batch.
pub const PROTOCOL_REPETITIONS: u32 = 2;

/// Summary of the leak analysis at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakReport {
    pub p_error: f64,
    pub p_success: f64,
    pub h_success: f64,
    pub delta_h: f64,
    pub length_limit: f64,
    pub leak_prob_per_bit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub sigma: f64,
    /// (π/2)/σ_φ
    pub ratio_left: f64,
    /// σ_φ/Δφ
    pub ratio_right: f64,
    pub pass: bool,
}

/// Minimum error for discriminating two pure states with squared overlap
/// `overlap`: ½(1 − √(1 − overlap)).
pub fn helstrom_error(overlap: f64) -> Result<f64, DomainError> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(DomainError::Overlap(overlap));
    }
    Ok(0.5 * (1.0 - (1.0 - overlap).sqrt()))
}

/// Attacker's basis error after `repetitions` exposures of each bit.
pub fn attacker_error(params: &NoiseParams, repetitions: u32) -> Result<f64, DomainError> {
    attacker_error_for(params.mean_photon_number(), params.delta_phi(), repetitions)
}

/// ½[1 − √(1 − e^{−(r⟨n⟩/4)Δφ²})] for raw parameters, including the Δφ = 0
/// limit excluded by [`NoiseParams`].
pub fn attacker_error_for(mean_photon_number: f64, delta_phi: f64, repetitions: u32) -> Result<f64, DomainError> {
    if repetitions == 0 {
        return Err(DomainError::Repetitions);
    }
    if delta_phi == 0.0 {
        return Ok(0.5);
    }
    // 1 − overlap via expm1: the overlap sits within 1e-5 of 1 at the
    // operating points of interest.
    let exponent = -(repetitions as f64 * mean_photon_number / 4.0) * delta_phi * delta_phi;
    Ok(0.5 * (1.0 - (-exponent.exp_m1()).sqrt()))
}

/// Per-emission entropy leak ΔH_k = 1 − H_s with H_s = −P_s log₂ P_s.
pub fn entropy_leak(p_error: f64) -> Result<f64, DomainError> {
    if !(0.0..=0.5).contains(&p_error) {
        return Err(DomainError::ErrorProbability(p_error));
    }
    Ok(1.0 - success_entropy(1.0 - p_error))
}

fn success_entropy(p_success: f64) -> f64 {
    if p_success == 0.0 {
        0.0
    } else {
        -p_success * p_success.log2()
    }
}

/// Emission budget L solving L·(ΔH_k − ½) = 1. Infinite when ΔH_k = ½.
pub fn length_limit(delta_h: f64) -> Result<f64, DomainError> {
    if !(0.5..=1.0).contains(&delta_h) {
        return Err(DomainError::EntropyLeak(delta_h));
    }
    let excess = delta_h - 0.5;
    Ok(if excess == 0.0 { f64::INFINITY } else { 1.0 / excess })
}

/// Full leak composition at the given repetition count.
pub fn leak_report(params: &NoiseParams, repetitions: u32) -> Result<LeakReport, DomainError> {
    leak_report_for(params.mean_photon_number(), params.delta_phi(), repetitions)
}

pub fn leak_report_for(mean_photon_number: f64, delta_phi: f64, repetitions: u32) -> Result<LeakReport, DomainError> {
    let p_error = attacker_error_for(mean_photon_number, delta_phi, repetitions)?;
    let p_success = 1.0 - p_error;
    let delta_h = entropy_leak(p_error)?;
    let length_limit = length_limit(delta_h)?;
    Ok(LeakReport {
        p_error,
        p_success,
        h_success: success_entropy(p_success),
        delta_h,
        length_limit,
        leak_prob_per_bit: 1.0 / length_limit,
    })
}

/// Checks π/2 ≫ σ_φ ≫ Δφ with "≫" read as a ratio of at least the guard.
pub fn check_condition(params: &NoiseParams) -> ConditionReport {
    condition_for(params.mean_photon_number(), params.delta_phi(), params.guard_ratio())
}

pub fn condition_for(mean_photon_number: f64, delta_phi: f64, guard_ratio: f64) -> ConditionReport {
    let sigma = physics::sigma_for(mean_photon_number);
    let ratio_left = FRAC_PI_2 / sigma;
    let ratio_right = sigma / delta_phi;
    ConditionReport {
        sigma,
        ratio_left,
        ratio_right,
        pass: ratio_left >= guard_ratio && ratio_right >= guard_ratio,
    }
}

/// Upper tail of the standard normal.
pub fn normal_q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Error of the classical maximum-likelihood phase receiver that sees the
/// recorded sample but not the basis: Q(Δφ·√r / (2σ_φ)).
pub fn classical_ml_error(params: &NoiseParams, repetitions: u32) -> Result<f64, DomainError> {
    classical_ml_error_for(params.mean_photon_number(), params.delta_phi(), repetitions)
}

pub fn classical_ml_error_for(mean_photon_number: f64, delta_phi: f64, repetitions: u32) -> Result<f64, DomainError> {
    if repetitions == 0 {
        return Err(DomainError::Repetitions);
    }
    let sigma = physics::sigma_for(mean_photon_number);
    if delta_phi == 0.0 {
        return Ok(0.5);
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(normal_q(delta_phi * (repetitions as f64).sqrt() / (2.0 * sigma)))
}

/// One grid point for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub mean_photon_number: f64,
    pub delta_phi: DeltaPhi,
    pub adc_bits: u32,
    pub guard_ratio: f64,
}

impl GridPoint {
    pub fn params(&self) -> Result<NoiseParams, ParamError> {
        NoiseParams::with_guard(self.mean_photon_number, self.delta_phi, self.adc_bits, self.guard_ratio)
    }
}

/// Cartesian grid in deterministic order: ⟨n⟩ outer, Δφ inner.
pub fn grid(n_values: &[f64], delta_phis: &[DeltaPhi], adc_bits: u32, guard_ratio: f64) -> Vec<GridPoint> {
    n_values
        .iter()
        .flat_map(|&n| {
            delta_phis.iter().map(move |&d| GridPoint {
                mean_photon_number: n,
                delta_phi: d,
                adc_bits,
                guard_ratio,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mean_photon_number: f64,
    pub delta_phi: f64,
    /// `Err` rows are kept in place and flagged rather than dropped.
    pub outcome: Result<(LeakReport, ConditionReport), String>,
}

pub fn sweep(points: &[GridPoint], repetitions: u32) -> Vec<SweepRow> {
    points
        .iter()
        .map(|point| {
            let outcome = point
                .params()
                .map_err(|e| e.to_string())
                .and_then(|params| {
                    let leak = leak_report(&params, repetitions).map_err(|e| e.to_string())?;
                    Ok((leak, check_condition(&params)))
                });
            SweepRow {
                mean_photon_number: point.mean_photon_number,
                delta_phi: point.delta_phi.radians(),
                outcome,
            }
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "n_mean,delta_phi,p_error,delta_h,length_limit,condition_pass";

/// Renders sweep rows as CSV. Invalid rows carry `invalid` in the value
/// columns.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{},", format_sig(row.mean_photon_number), format_sig(row.delta_phi));
        match &row.outcome {
            Ok((leak, cond)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_sig(leak.p_error),
                    format_sig(leak.delta_h),
                    format_sig(leak.length_limit),
                    cond.pass
                );
            }
            Err(_) => out.push_str("invalid,invalid,invalid,invalid\n"),
        }
    }
    out
}

/// Twelve significant digits, round-half-even on the exact binary value,
/// plain decimal notation. Infinity renders as `inf`.
pub fn format_sig(value: f64) -> String {
    const DIGITS: i32 = 12;
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return "0".into();
    }
    // `{:e}` with precision rounds the exact binary value half-to-even.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let mut body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    if body.contains('.') {
        body = body.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if negative {
        body.insert(0, '-');
    }
    body
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Reference values below were computed independently with 30-digit
    // arithmetic (mpmath) straight from the closed forms.

    #[test]
    fn helstrom_examples() {
        assert_eq!(helstrom_error(0.0).unwrap(), 0.0);
        assert_eq!(helstrom_error(1.0).unwrap(), 0.5);
        assert!(rel(helstrom_error(0.77880).unwrap(), 0.264_840_479_673_903_06) < 1e-12);
        assert!(helstrom_error(-0.1).is_err());
        assert!(helstrom_error(1.1).is_err());
        assert!(helstrom_error(f64::NAN).is_err());
    }

    #[test]
    fn attacker_error_examples() {
        assert_eq!(attacker_error_for(100.0, 0.0, 2).unwrap(), 0.5);
        assert_eq!(attacker_error_for(5.0, 0.0, 1).unwrap(), 0.5);
        let p = NoiseParams::from_radians(100.0, 0.1).unwrap();
        assert!(rel(attacker_error(&p, 2).unwrap(), 0.186_364_327_488_339_36) < 1e-12);
        let p = NoiseParams::from_exponent(100.0, 11).unwrap();
        assert!(rel(attacker_error(&p, 2).unwrap(), 0.498_273_670_229_859_97) < 1e-12);
        assert_eq!(attacker_error(&p, 0), Err(DomainError::Repetitions));
    }

    #[test]
    fn entropy_leak_examples() {
        assert_eq!(entropy_leak(0.5).unwrap(), 0.5);
        assert_eq!(entropy_leak(0.0).unwrap(), 1.0);
        assert!(rel(entropy_leak(0.18640).unwrap(), 0.757_865_792_993_030_03) < 1e-12);
        assert!(entropy_leak(0.6).is_err());
    }

    #[test]
    fn length_limit_examples() {
        assert_eq!(length_limit(0.5).unwrap(), f64::INFINITY);
        assert!(rel(length_limit(0.5005).unwrap(), 2000.0) < 1e-9);
        assert!(length_limit(0.49).is_err());
        let p = NoiseParams::from_exponent(100.0, 11).unwrap();
        let report = leak_report(&p, PROTOCOL_REPETITIONS).unwrap();
        assert!(rel(report.length_limit, 1301.181_605_898_058_1) < 1e-6, "{}", report.length_limit);
        assert!(rel(report.delta_h, 0.500_768_532_229_065_61) < 1e-12);
        assert_eq!(report.p_success, 1.0 - report.p_error);
        assert!(rel(report.leak_prob_per_bit, report.delta_h - 0.5) < 1e-12);
    }

    #[test]
    fn condition_examples() {
        let p = NoiseParams::from_exponent(100.0, 11).unwrap();
        let c = check_condition(&p);
        assert!(rel(c.ratio_left, 11.107_207_345_395_916) < 1e-12);
        assert!(rel(c.ratio_right, 289.630_937_574_009_87) < 1e-12);
        assert!(c.pass);
        let c = check_condition(&NoiseParams::from_radians(2.0, 0.5).unwrap());
        assert!(rel(c.ratio_left, FRAC_PI_2) < 1e-15);
        assert!(!c.pass);
        let sigma = (2.0f64 / 3.0).sqrt();
        let c = condition_for(3.0, sigma, 1.01);
        assert!((c.ratio_right - 1.0).abs() < 1e-15);
        assert!(!c.pass);
    }

    #[test]
    fn classical_ml_examples() {
        assert_eq!(classical_ml_error_for(100.0, 0.0, 1).unwrap(), 0.5);
        let p = NoiseParams::from_radians(100.0, 0.1).unwrap();
        assert!(rel(classical_ml_error(&p, 1).unwrap(), 0.361_836_804_915_881_53) < 1e-9);
    }

    #[test]
    fn normal_tail() {
        assert_eq!(normal_q(0.0), 0.5);
        // Q(11.107...) ≈ 5.8e-29, the legitimate receiver's error rate.
        let q = normal_q(11.107_207_345_395_916);
        assert!(q > 1e-29 && q < 1e-27, "{q}");
    }

    #[test]
    fn sweep_single_point_matches_ops() {
        let pts = grid(&[100.0], &[DeltaPhi::Exponent(11)], 16, 5.0);
        let rows = sweep(&pts, 2);
        let (leak, cond) = rows[0].outcome.clone().unwrap();
        let params = pts[0].params().unwrap();
        assert_eq!(leak, leak_report(&params, 2).unwrap());
        assert_eq!(cond, check_condition(&params));
    }

    #[test]
    fn sweep_monotonicity() {
        let ns = [20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
        let ds: Vec<DeltaPhi> = (4..=11).map(DeltaPhi::Exponent).collect();
        let rows = sweep(&grid(&ns, &ds, 16, 5.0), 2);
        assert_eq!(rows.len(), ns.len() * ds.len());
        let leak = |i: usize, j: usize| rows[i * ds.len() + j].outcome.as_ref().unwrap().0;
        for j in 0..ds.len() {
            for i in 1..ns.len() {
                assert!(leak(i, j).delta_h >= leak(i - 1, j).delta_h);
            }
        }
        // Δφ shrinks as the exponent grows, so L must not decrease along j.
        for i in 0..ns.len() {
            for j in 1..ds.len() {
                assert!(leak(i, j).length_limit >= leak(i, j - 1).length_limit);
            }
        }
    }

    #[test]
    fn sweep_flags_invalid_points() {
        let pts = grid(&[100.0, 0.5], &[DeltaPhi::Radians(0.1)], 16, 5.0);
        let rows = sweep(&pts, 2);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[2], "0.5,0.1,invalid,invalid,invalid,invalid");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn csv_rendering() {
        let rows = sweep(&grid(&[100.0], &[DeltaPhi::Exponent(11)], 16, 5.0), 2);
        let csv = sweep_csv(&rows);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "100,0.00048828125,0.49827367023,0.500768532229,1301.18160590,true"
                .replace("1301.18160590", "1301.1816059")
        );
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(100.0), "100");
        assert_eq!(format_sig(1e15), "1000000000000000");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(2f64.powi(-11)), "0.00048828125");
        assert_eq!(format_sig(-2.5e-7), "-0.00000025");
        // 0.5 ulp ties at 12 digits: exactly representable halves.
        assert_eq!(format_sig(1.000_000_000_005), "1.00000000001");
        assert_eq!(format_sig(0.125), "0.125");
    }

    proptest! {
        #[test]
        fn length_identity(n in 2.0f64..1e4, dphi in 1e-5f64..1.5) {
            let r = leak_report_for(n, dphi, 2).unwrap();
            if r.length_limit.is_finite() {
                prop_assert!((r.length_limit * (r.delta_h - 0.5) - 1.0).abs() < 1e-12);
            }
            prop_assert!(r.delta_h >= 0.5 && r.delta_h <= 1.0);
        }

        #[test]
        fn more_repetitions_fewer_errors(n in 2.0f64..1e4, dphi in 1e-5f64..1.5) {
            prop_assert!(attacker_error_for(n, dphi, 2).unwrap() <= attacker_error_for(n, dphi, 1).unwrap());
        }

        #[test]
        fn helstrom_below_classical(n in 2.0f64..1e3, dphi in 1e-5f64..1.5, r in 1u32..4) {
            let quantum = helstrom_error(physics::overlap_for(r as f64 * n, dphi, true)).unwrap();
            let classical = classical_ml_error_for(n, dphi, r).unwrap();
            prop_assert!(classical >= quantum - 1e-12);
        }

        #[test]
        fn entropy_leak_strictly_decreasing(a in 1e-6f64..0.5, b in 1e-6f64..0.5) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(entropy_leak(lo).unwrap() > entropy_leak(hi).unwrap());
        }
    }
}
