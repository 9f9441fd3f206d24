//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use notp_core::analysis::{
    attacker_error_for, classical_ml_error, entropy_leak, helstrom_error, leak_report, length_limit,
    PROTOCOL_REPETITIONS,
};
use notp_core::attacks::{
    eavesdrop_experiment, kpa_campaign, kpa_experiment, wilson_interval, KpaScenario, Z_99_ONE_SIDED,
};
use notp_core::net::{run_pair, FailureClass, LinkConfig, SessionEnd, Tamper};
use notp_core::physics::{decode_with_basis, overlap_for, phrg_bits, record_emission, state_overlap};
use notp_core::protocol::{
    init_session, mac_tag, mac_verify, InitOptions, LeakageLedger, RekeyReason, Role, SecretSource, SessionState,
};
use notp_core::transcript::{Capture, Transcript};
use notp_core::{keyfile, KeyBuffer, KeyOrigin, NoiseParams, SeededEntropy, ShuffleConfig};
use sha2::{Digest, Sha256};

const FORMULA_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-12;
const LIMIT_TOL: f64 = 1e-12;

// Reference values evaluated independently at 30 significant digits.
const OVERLAP_EXACT_100_01: f64 = 0.778_841_343_288_287_47;
const OVERLAP_APPROX_100_01: f64 = 0.778_800_783_071_404_87;
const HELSTROM_077880: f64 = 0.264_840_479_673_903_06;
const PE_100_01_R2: f64 = 0.186_364_327_488_339_36;
const PE_100_2M11_R2: f64 = 0.498_273_670_229_859_97;
const LEAK_018640: f64 = 0.757_865_792_993_030_03;
const DELTA_H_100_2M11: f64 = 0.500_768_532_229_065_61;
const L_100_2M11: f64 = 1301.181_605_898_058_1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn params(n: f64, dphi: f64) -> NoiseParams {
    NoiseParams::from_radians(n, dphi).unwrap()
}

fn p_2_11() -> NoiseParams {
    NoiseParams::from_exponent(100.0, 11).unwrap()
}

fn genesis(bits: usize, seed: u64) -> KeyBuffer {
    let mut key = phrg_bits(bits, &mut SeededEntropy::new(seed)).unwrap();
    key.set_origin(KeyOrigin::Genesis);
    key
}

fn pair(params: NoiseParams, shuffle: ShuffleConfig, key: &KeyBuffer) -> (SessionState, SessionState) {
    let opts = InitOptions::default();
    (
        init_session(key.clone(), params, shuffle.clone(), Role::Initiator, opts).unwrap(),
        init_session(key.clone(), params, shuffle, Role::Responder, opts).unwrap(),
    )
}

fn link(key: &KeyBuffer, batch: usize) -> LinkConfig {
    LinkConfig::new(keyfile::key_id(&keyfile::encode(key, true).unwrap()), batch)
}

fn c1_formulas() -> Verdict {
    let start = Instant::now();
    let p = params(100.0, 0.1);
    let r = PROTOCOL_REPETITIONS;
    let dh = entropy_leak(PE_100_2M11_R2).unwrap();
    let l = length_limit(dh).unwrap();
    let checks = [
        ("overlap_exact", state_overlap(&p, true), OVERLAP_EXACT_100_01),
        ("overlap_approx", state_overlap(&p, false), OVERLAP_APPROX_100_01),
        ("helstrom", helstrom_error(0.77880).unwrap(), HELSTROM_077880),
        ("attacker_error(0.1)", attacker_error_for(100.0, 0.1, r).unwrap(), PE_100_01_R2),
        ("attacker_error(2^-11)", attacker_error_for(100.0, 2f64.powi(-11), r).unwrap(), PE_100_2M11_R2),
        ("entropy_leak", entropy_leak(0.18640).unwrap(), LEAK_018640),
        ("delta_h", dh, DELTA_H_100_2M11),
        ("length_limit", l, L_100_2M11),
    ];
    let worst = checks.iter().map(|(name, got, want)| (rel(*got, *want), *name)).fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    let gap = rel(state_overlap(&p, false), state_overlap(&p, true));
    let identity = (l * (dh - 0.5) - 1.0).abs();
    let elapsed = start.elapsed();
    verdict(
        worst.0 < FORMULA_TOL && gap < 1e-4 && identity < IDENTITY_TOL && elapsed < Duration::from_secs(1),
        format!(
            "worst rel err {:.1e} ({}), overlap gap {gap:.2e}, |L(dH-1/2)-1| = {identity:.1e}, L = {l:.4}, {elapsed:.0?}",
            worst.0, worst.1
        ),
    )
}

fn c2_limits() -> Verdict {
    let pe0 = attacker_error_for(100.0, 0.0, PROTOCOL_REPETITIONS).unwrap();
    let dh0 = entropy_leak(pe0).unwrap();
    let approach: Vec<f64> =
        (1..=8).map(|k| attacker_error_for(100.0, 10f64.powi(-k), PROTOCOL_REPETITIONS).unwrap()).collect();
    let monotone = approach.windows(2).all(|w| w[1] >= w[0] && w[1] <= 0.5);
    let helstrom0 = helstrom_error(0.0).unwrap();
    let far = attacker_error_for(1e6, 1.0, 1).unwrap();
    let pass = (pe0 - 0.5).abs() <= LIMIT_TOL
        && (dh0 - 0.5).abs() <= LIMIT_TOL
        && monotone
        && helstrom0.abs() <= LIMIT_TOL
        && far.abs() <= LIMIT_TOL
        && overlap_for(1e6, 1.0, true) == 0.0;
    verdict(
        pass,
        format!("P_e(0) = {pe0}, dH(0) = {dh0}, P_e(1e-8) = {:.12}, helstrom(0) = {helstrom0}, P_e(overlap 0) = {far}", approach[7]),
    )
}

fn c3_fidelity() -> Verdict {
    let start = Instant::now();
    let p = p_2_11();
    let mut src = SeededEntropy::new(3);
    let total = 1_000_000usize;
    let mut errors = 0usize;
    let chunk = 4096;
    let mut done = 0;
    while done < total {
        let n = chunk.min(total - done);
        let bits = phrg_bits(n, &mut src).unwrap();
        let bases = phrg_bits(n, &mut src).unwrap();
        for (&b, &k) in bits.bits().iter().zip(bases.bits()) {
            let s = record_emission(b, k, &p, &mut src).unwrap();
            errors += (decode_with_basis(s, k, &p) != b) as usize;
        }
        done += n;
    }
    let elapsed = start.elapsed();
    verdict(errors == 0 && elapsed < Duration::from_secs(30), format!("{errors} errors in {total} emissions, {elapsed:.1?}"))
}

fn c4_eavesdropper() -> Verdict {
    let start = Instant::now();
    let points = [(100.0, 0.1), (100.0, 0.05), (100.0, 0.2), (400.0, 0.1), (50.0, 0.1), (1000.0, 0.02)];
    let trials = 100_000u64;
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for (i, &(n, dphi)) in points.iter().enumerate() {
        let p = params(n, dphi);
        let out = eavesdrop_experiment(&p, trials, 40 + i as u64, 4);
        let expected = classical_ml_error(&p, 1).unwrap();
        let sd = (expected * (1.0 - expected) / trials as f64).sqrt();
        let z = (out.error_rate() - expected) / sd;
        worst_z = worst_z.max(z.abs());
        // Upper one-sided 99% bound on the error rate.
        let errors = trials - out.correct;
        let upper = wilson_interval(errors, trials, Z_99_ONE_SIDED).1;
        let helstrom = helstrom_error(state_overlap(&p, true)).unwrap();
        ok &= z.abs() <= 3.0 && upper >= helstrom;
    }
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(120),
        format!("6 points x {trials} trials, worst |z| = {worst_z:.2}, none below Helstrom, {elapsed:.1?}"),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_notp")
}

fn field(stdout: &str, key: &str) -> Vec<String> {
    stdout
        .lines()
        .filter_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')).map(str::to_string))
        .collect()
}

fn c5_amplification() -> Verdict {
    let l = leak_report(&p_2_11(), PROTOCOL_REPETITIONS).unwrap().length_limit;
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("g.key");
    let ok = Command::new(bin()).args(["-q", "keygen", "--seed", "51", "--out"]).arg(&key).stdout(Stdio::null()).status().unwrap().success();
    let out = Command::new(bin()).args(["-q", "simulate", "--seed", "52", "--key"]).arg(&key).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let harvested: usize = field(&stdout, "harvested_bits").first().and_then(|v| v.parse().ok()).unwrap_or(0);
    let end = field(&stdout, "end").first().cloned().unwrap_or_default();
    verdict(
        ok && out.status.success() && l > 1e3 && harvested > 1000 && end == "rekey-needed",
        format!("L = {l:.1}, simulate harvested {harvested} bits from one 1024-bit genesis key, end = {end}"),
    )
}

fn c6_ledger() -> Verdict {
    let key = genesis(1024, 61);
    let (mut a, mut b) = pair(p_2_11(), ShuffleConfig::disabled(), &key);
    a.set_ledger(LeakageLedger::with_budget(1295));
    b.set_ledger(LeakageLedger::with_budget(1295));
    let cfg = link(&key, 256);
    let out = run_pair(&mut a, &mut b, &cfg, &cfg, 100, SeededEntropy::new(62), SeededEntropy::new(63), None, None);
    let (ra, rb) = match (out.initiator, out.responder) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (ra, rb) => return verdict(false, format!("session failed: {:?} / {:?}", ra.err(), rb.err())),
    };
    let rekey = SessionEnd::RekeyNeeded(RekeyReason::BudgetExhausted);
    let pass = ra.cycles == 5 && rb.cycles == 5 && ra.end == rekey && rb.end == rekey && a.ledger().emitted() <= 1295;
    verdict(pass, format!("{} batches, then {:?}; emitted {} of 1295", ra.cycles, ra.end, a.ledger().emitted()))
}

fn c7_kpa() -> Verdict {
    let start = Instant::now();
    let p = p_2_11();
    let undefended = KpaScenario {
        params: p,
        genesis_bits: 1024,
        batch: 256,
        shuffle: ShuffleConfig::disabled(),
        leak_selector: false,
    };
    let report = kpa_experiment(&undefended, 71).unwrap();
    let chained = report.recovery.k2.iter().zip(&report.true_k2).filter(|(r, _)| r.is_some()).count();
    let exact = report.outcome.is_some_and(|o| o.correct == o.trials) && chained == report.recovery.k1.len().min(report.true_k2.len());
    let defended = KpaScenario { shuffle: ShuffleConfig::enabled(32, [7u8; 32]).unwrap(), ..undefended };
    let out = kpa_campaign(&defended, 10_000, 72).unwrap();
    let elapsed = start.elapsed();
    let in_band = (0.48..=0.52).contains(&out.accuracy) && out.contains(0.5);
    verdict(
        exact && in_band && out.trials >= 10_000 && elapsed < Duration::from_secs(60),
        format!(
            "undefended recovered {chained} bits of K2 exactly; defended accuracy {:.4} over {} bits, 99% CI [{:.4}, {:.4}], {elapsed:.1?}",
            out.accuracy, out.trials, out.wilson_interval.0, out.wilson_interval.1
        ),
    )
}

fn c8_nondeterminism() -> Verdict {
    let key = genesis(1024, 81);
    let fresh = phrg_bits(256, &mut SeededEntropy::new(82)).unwrap();
    let run = |seed: u64| {
        let (mut a, _) = pair(p_2_11(), ShuffleConfig::disabled(), &key);
        a.produce_batch_with_bits(fresh.clone(), &mut SeededEntropy::new(seed)).unwrap().samples
    };
    let (x, y) = (run(1), run(2));
    let differ = x.iter().zip(&y).filter(|(a, b)| a != b).count();
    let frac = differ as f64 / x.len() as f64;
    verdict(frac > 0.99, format!("{differ} of {} sample positions differ ({:.2}%)", x.len(), 100.0 * frac))
}

fn spawn_serve(dir: &Path, keys: &str, sessions: usize) -> (std::process::Child, String) {
    let mut child = Command::new(bin())
        .args(["-q", "serve", "--listen", "127.0.0.1:0", "--seed", "91", "--sessions"])
        .arg(sessions.to_string())
        .args(["--key", keys, "--out"])
        .arg(dir.join("s.key"))
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("serve exited early").unwrap();
        if let Some(addr) = line.strip_prefix("listening on ") {
            break addr.to_string();
        }
    };
    std::thread::spawn(move || for _ in lines {});
    (child, addr)
}

fn digest(path: &Path) -> [u8; 32] {
    Sha256::digest(std::fs::read(path).unwrap()).into()
}

fn c9_network() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let sessions = 8;
    let keys: Vec<PathBuf> = (0..sessions).map(|i| dir.path().join(format!("g{i}.key"))).collect();
    for (i, k) in keys.iter().enumerate() {
        let seed = (900 + i).to_string();
        assert!(Command::new(bin()).args(["-q", "keygen", "--seed", &seed, "--out"]).arg(k).stdout(Stdio::null()).status().unwrap().success());
    }
    let list = keys.iter().map(|k| k.display().to_string()).collect::<Vec<_>>().join(",");
    let start = Instant::now();
    let (serve, addr) = spawn_serve(dir.path(), &list, sessions);
    let connect = Command::new(bin())
        .args(["-q", "connect", "--seed", "92", "--peer", &addr, "--key", &list, "--out"])
        .arg(dir.path().join("c.key"))
        .output()
        .unwrap();
    let served = serve.wait_with_output().unwrap();
    let elapsed = start.elapsed();
    if !connect.status.success() || !served.status.success() {
        return verdict(false, format!("connect {:?}, serve {:?}", connect.status, served.status));
    }
    let stdout = String::from_utf8_lossy(&connect.stdout);
    let bits: usize = field(&stdout, "harvested_bits").iter().map(|v| v.parse::<usize>().unwrap()).sum();
    let identical = (0..sessions).all(|i| {
        digest(&dir.path().join(format!("c.key.{i}"))) == digest(&dir.path().join(format!("s.key.{i}")))
    });
    verdict(
        identical && bits >= 10_000 && elapsed < Duration::from_secs(10),
        format!("{sessions} TCP sessions, {bits} bits exported per side, digests identical: {identical}, {elapsed:.2?}"),
    )
}

fn c10_corruption() -> Verdict {
    let start = Instant::now();
    let key = genesis(1024, 101);
    let mut cfg = link(&key, 256);
    cfg.deadline = Duration::from_millis(150);
    let clean = {
        let (mut a, mut b) = pair(p_2_11(), ShuffleConfig::disabled(), &key);
        let mut capture = Capture::default();
        let out = run_pair(&mut a, &mut b, &cfg, &cfg, 2, SeededEntropy::new(1), SeededEntropy::new(2), Some(&mut capture), None);
        assert!(out.is_ok());
        Transcript::parse(&capture.frames).unwrap();
        capture.frames.len() as u64
    };
    let runs = 1000u64;
    let (mut framing, mut integrity, mut other, mut silent, mut undetected) = (0, 0, 0, 0, 0);
    for i in 0..runs {
        let offset = i * clean / runs;
        let mask = 1u8 << (i % 8);
        let (mut a, mut b) = pair(p_2_11(), ShuffleConfig::disabled(), &key);
        let out = run_pair(
            &mut a,
            &mut b,
            &cfg,
            &cfg,
            2,
            SeededEntropy::new(1),
            SeededEntropy::new(2),
            None,
            Some(Tamper::new(offset, mask)),
        );
        let agree = a.harvested().iter().map(KeyBuffer::bits).eq(b.harvested().iter().map(KeyBuffer::bits));
        match (&out.initiator, &out.responder) {
            (Ok(_), Ok(_)) => {
                undetected += 1;
                silent += (!agree) as u32;
            }
            (i, r) => {
                let first = [i.as_ref().err(), r.as_ref().err()].into_iter().flatten().next().unwrap();
                match first.class() {
                    FailureClass::Framing | FailureClass::Timeout => framing += 1,
                    FailureClass::Integrity => integrity += 1,
                    _ => other += 1,
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        silent == 0 && undetected == 0,
        format!(
            "{runs} flips over {clean} bytes: {framing} framing/truncation, {integrity} digest, {other} handshake/protocol rejects, {undetected} undetected, {silent} silent disagreements, {elapsed:.1?}"
        ),
    )
}

fn c11_mac() -> Verdict {
    let key = genesis(1024, 111);
    let (mut a, mut b) = pair(p_2_11(), ShuffleConfig::disabled(), &key);
    let cfg = link(&key, 256);
    assert!(run_pair(&mut a, &mut b, &cfg, &cfg, 4, SeededEntropy::new(1), SeededEntropy::new(2), None, None).is_ok());
    let (mut ka, kb) = (a.export_unspent(), b.export_unspent());
    let message = b"wire 100 to account 42, ref 7".to_vec();
    let mut kb_verify = kb.clone();
    let tag = mac_tag(&message, &mut ka).unwrap();
    let round_trip = mac_verify(&message, &tag, &mut kb_verify).unwrap();
    let flips_rejected = (0..message.len() * 8).all(|bit| {
        let mut m = message.clone();
        m[bit / 8] ^= 0x80 >> (bit % 8);
        !mac_verify(&m, &tag, &mut kb.clone()).unwrap()
    });
    let w0 = ka.watermark();
    let tag2 = mac_tag(&message, &mut ka).unwrap();
    let w1 = ka.watermark();
    let disjoint = w0 == 256 && w1 == 512 && tag2 != tag && ka.unspent_bits() == ka.len() - 512;
    let second_ok = mac_verify(&message, &tag2, &mut kb_verify).unwrap();
    verdict(
        round_trip && flips_rejected && disjoint && second_ok,
        format!(
            "T'=T: {round_trip}; {} single-bit flips rejected: {flips_rejected}; tags use bits [0,{w0}) and [{w0},{w1})",
            message.len() * 8
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("formula suite", c1_formulas),
        ("limiting values", c2_limits),
        ("legitimate-channel fidelity", c3_fidelity),
        ("eavesdropper calibration", c4_eavesdropper),
        ("amplification", c5_amplification),
        ("ledger enforcement", c6_ledger),
        ("known-plaintext attack", c7_kpa),
        ("nondeterminism", c8_nondeterminism),
        ("networked end-to-end", c9_network),
        ("wire robustness", c10_corruption),
        ("message authentication", c11_mac),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += (!v.pass) as u32;
        println!("criterion {:>2} {}: {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
