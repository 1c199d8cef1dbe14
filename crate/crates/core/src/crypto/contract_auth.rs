//! Billing authentication data: an HMAC over the proof-request hash, the
//! contract id and a timestamp, sealed to the EMSP.

use std::collections::{BTreeMap, BTreeSet};

use super::{ContractId, ContractKey, CryptoError, CryptoSuite, DidPublicKeys, DidSecretKeys, Drbg};
use crate::codec::{tags, Bytes, Wire};
use crate::wire_record;

/// Acceptance window around the EMSP's clock, in seconds.
pub const DEFAULT_WINDOW_SECS: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractAuthPayload {
    pub tag: Bytes,
    pub contract_id: ContractId,
    pub timestamp: u64,
}

wire_record!(ContractAuthPayload = tags::CONTRACT_AUTH_PAYLOAD; { tag, contract_id, timestamp });

fn tag_input(req_hash: &[u8; 32], id: &ContractId, timestamp: u64) -> Vec<u8> {
    let mut m = req_hash.to_vec();
    m.extend_from_slice(&id.0);
    m.extend_from_slice(&timestamp.to_be_bytes());
    m
}

/// Builds the sealed payload for `H(req_bytes) || contract_id || now`.
#[allow(clippy::too_many_arguments)]
pub fn make_contract_auth<S: CryptoSuite>(
    suite: &S,
    emsp: &DidPublicKeys,
    key: &ContractKey,
    contract_id: ContractId,
    req_bytes: &[u8],
    now: u64,
    rng: &mut Drbg,
) -> Vec<u8> {
    let req_hash = super::sha256(req_bytes);
    let payload = ContractAuthPayload {
        tag: Bytes(suite.hmac_tag(key, &tag_input(&req_hash, &contract_id, now))),
        contract_id,
        timestamp: now,
    };
    suite.pk_encrypt(emsp, None, &payload.to_bytes(), rng)
}

/// Contract keys known to an EMSP and the `(contract_id, tag)` pairs already
/// accepted.
#[derive(Debug, Clone, Default)]
pub struct ContractStore {
    pub keys: BTreeMap<ContractId, ContractKey>,
    seen: BTreeSet<(ContractId, Vec<u8>)>,
}

impl ContractStore {
    pub fn insert(&mut self, id: ContractId, key: ContractKey) {
        self.keys.insert(id, key);
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }
}

/// Opens and checks contract authentication data; records it as seen on
/// success.
pub fn check_contract_auth<S: CryptoSuite>(
    suite: &S,
    emsp: &DidSecretKeys,
    store: &mut ContractStore,
    blob: &[u8],
    req_hash: &[u8; 32],
    now: u64,
    window: u64,
) -> Result<ContractAuthPayload, CryptoError> {
    let opened = suite.pk_decrypt(emsp, blob)?;
    let payload = ContractAuthPayload::from_bytes(&opened.plaintext).map_err(|_| CryptoError::DecryptFailed)?;
    let key = store.keys.get(&payload.contract_id).ok_or(CryptoError::UnknownContract)?;
    if !suite.hmac_verify(key, &tag_input(req_hash, &payload.contract_id, payload.timestamp), &payload.tag) {
        return Err(CryptoError::BadTag);
    }
    if payload.timestamp.abs_diff(now) > window {
        return Err(CryptoError::Expired);
    }
    if !store.seen.insert((payload.contract_id, payload.tag.0.clone())) {
        return Err(CryptoError::Replayed);
    }
    Ok(payload)
}
