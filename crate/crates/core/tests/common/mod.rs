#![allow(dead_code)]

use notp_core::keyfile;
use notp_core::net::LinkConfig;
use notp_core::physics::{self, NoiseParams};
use notp_core::protocol::{init_session, InitOptions, Role, SessionState, ShuffleConfig};
use notp_core::{KeyBuffer, KeyOrigin, SeededEntropy};

pub fn params_2_11() -> NoiseParams {
    NoiseParams::from_exponent(100.0, 11).unwrap()
}

pub fn genesis(bits: usize, seed: u64) -> KeyBuffer {
    let mut key = physics::phrg_bits(bits, &mut SeededEntropy::new(seed)).unwrap();
    key.set_origin(KeyOrigin::Genesis);
    key
}

pub fn key_id_of(key: &KeyBuffer) -> [u8; 32] {
    keyfile::key_id(&keyfile::encode(key, true).unwrap())
}

pub fn pair(params: NoiseParams, shuffle: ShuffleConfig, key: &KeyBuffer) -> (SessionState, SessionState) {
    let opts = InitOptions::default();
    let a = init_session(key.clone(), params, shuffle.clone(), Role::Initiator, opts).unwrap();
    let b = init_session(key.clone(), params, shuffle, Role::Responder, opts).unwrap();
    (a, b)
}

pub fn link(key: &KeyBuffer, batch: usize) -> LinkConfig {
    LinkConfig::new(key_id_of(key), batch)
}

pub fn harvested_bits(session: &SessionState) -> Vec<Vec<notp_core::Bit>> {
    session.harvested().iter().map(|k| k.bits().to_vec()).collect()
}
