//! Perfect-cryptography backend.
//!
//! Every ciphertext, signature, credential and proof is an opaque token
//! `(op, key_id, digest, handle, mac)`. The MAC is keyed by an oracle secret
//! that no actor or adversary ever sees, so tokens cannot be forged or
//! altered, and plaintexts stay inside the oracle instead of on the bus.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use rand::SeedableRng;

use super::bigint::random_bits;
use super::identity::hmac_sha256;
use super::{
    random_array, tagged_hash, ContractKey, CryptoError, CryptoSuite, DeltaEntry, DeltaOp, Did, DidKeys, DidPublicKeys,
    DidSecretKeys, Drbg, MasterSecret, Opened, PresentationView, ProofRequest, Witness, RESERVED_SLOTS,
};
use crate::codec::{tags, Bytes, Wire};
use crate::wire_record;

const REV_INDEX_BITS: u64 = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicToken {
    pub op: String,
    pub key_id: Bytes,
    pub digest: Bytes,
    pub handle: u64,
    pub mac: Bytes,
}

wire_record!(SymbolicToken = tags::SYM_TOKEN; { op, key_id, digest, handle, mac });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymIssuerPublicKey {
    pub key_id: Bytes,
    pub slots: u64,
}

wire_record!(SymIssuerPublicKey = tags::SYM_ISSUER_PUBLIC_KEY; { key_id, slots });

#[derive(Clone, PartialEq, Eq)]
pub struct SymIssuerSecretKey {
    pub secret: Bytes,
}

wire_record!(SymIssuerSecretKey = tags::SYM_ISSUER_SECRET_KEY; { secret });

#[derive(Clone, PartialEq, Eq)]
pub struct SymBlindingFactor {
    pub handle: u64,
}

wire_record!(SymBlindingFactor = tags::SYM_BLINDING_FACTOR; { handle });

#[derive(Clone, PartialEq, Eq)]
pub struct SymCredential {
    pub token: SymbolicToken,
    pub messages: Vec<BigUint>,
}

wire_record!(SymCredential = tags::SYM_CREDENTIAL; { token, messages });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymPresentation {
    pub token: SymbolicToken,
    pub revealed: BTreeMap<String, String>,
}

wire_record!(SymPresentation = tags::SYM_PRESENTATION; { token, revealed });

impl PresentationView for SymPresentation {
    fn revealed(&self) -> &BTreeMap<String, String> {
        &self.revealed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymAccParams {
    pub registry_nonce: Bytes,
}

wire_record!(SymAccParams = tags::SYM_ACC_PARAMS; { registry_nonce });

enum Entry {
    Sealed { recipient: Bytes, plaintext: Vec<u8>, sender: Option<Bytes> },
    Blinded { ms: BigUint },
    Signed { messages: Vec<BigUint> },
}

struct Oracle {
    mac_key: [u8; 32],
    rng: Drbg,
    entries: BTreeMap<u64, Entry>,
    acc_sets: BTreeMap<BigUint, BTreeSet<BigUint>>,
}

impl Oracle {
    fn mac(&self, op: &str, key_id: &[u8], digest: &[u8], handle: u64) -> Bytes {
        let body = tagged_hash("pnc/sym/token/v1", &[op.as_bytes(), key_id, digest, &handle.to_be_bytes()]);
        Bytes(hmac_sha256(&self.mac_key, &body))
    }

    fn mint(&mut self, op: &str, key_id: &[u8], digest: [u8; 32], entry: Option<Entry>) -> SymbolicToken {
        let handle = match entry {
            Some(e) => {
                let h = self.entries.len() as u64 + 1;
                self.entries.insert(h, e);
                h
            }
            None => 0,
        };
        SymbolicToken {
            op: op.to_string(),
            key_id: Bytes(key_id.to_vec()),
            digest: Bytes(digest.to_vec()),
            handle,
            mac: self.mac(op, key_id, &digest, handle),
        }
    }

    fn authentic(&self, t: &SymbolicToken, op: &str, key_id: &[u8]) -> bool {
        t.op == op && t.key_id.0.as_slice() == key_id && self.mac(&t.op, &t.key_id, &t.digest, t.handle) == t.mac
    }
}

/// Symbolic suite. Clones share one oracle; create a fresh suite per run.
#[derive(Clone)]
pub struct Symbolic {
    oracle: Arc<Mutex<Oracle>>,
}

impl std::fmt::Debug for Symbolic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Symbolic")
    }
}

impl Symbolic {
    pub fn new(seed: u64) -> Self {
        let mut rng = super::drbg(seed, "symbolic-oracle");
        let mac_key = random_array(&mut rng);
        Self {
            oracle: Arc::new(Mutex::new(Oracle {
                mac_key,
                rng: Drbg::from_seed(random_array(&mut rng)),
                entries: BTreeMap::new(),
                acc_sets: BTreeMap::new(),
            })),
        }
    }

    fn with<R>(&self, f: impl FnOnce(&mut Oracle) -> R) -> R {
        f(&mut self.oracle.lock().expect("oracle lock poisoned"))
    }

    fn public_of(secret: &[u8], kind: &str) -> Bytes {
        Bytes(tagged_hash("pnc/sym/pk/v1", &[kind.as_bytes(), secret]).to_vec())
    }

    fn acc_value(params: &SymAccParams, active: &BTreeSet<BigUint>) -> BigUint {
        BigUint::from_bytes_be(&tagged_hash("pnc/sym/acc/v1", &[&params.registry_nonce, &active.to_bytes()]))
    }

    fn presentation_digest(req: &ProofRequest, revealed: &BTreeMap<String, String>, acc_value: &BigUint) -> [u8; 32] {
        tagged_hash("pnc/sym/presentation/v1", &[&req.to_bytes(), &revealed.to_bytes(), &acc_value.to_bytes()])
    }

    fn member(&self, own: &BigUint, value: &BigUint) -> bool {
        self.with(|o| o.acc_sets.get(value).is_some_and(|s| s.contains(own)))
    }
}

impl CryptoSuite for Symbolic {
    const NAME: &'static str = "symbolic";

    type IssuerPublicKey = SymIssuerPublicKey;
    type IssuerSecretKey = SymIssuerSecretKey;
    type BlindedSecret = SymbolicToken;
    type BlindingFactor = SymBlindingFactor;
    type PreCredential = SymbolicToken;
    type Credential = SymCredential;
    type Presentation = SymPresentation;
    type AccParams = SymAccParams;

    fn gen_did_keys(&self, rng: &mut Drbg) -> DidKeys {
        let sig: [u8; 32] = random_array(rng);
        let enc: [u8; 32] = random_array(rng);
        let public = DidPublicKeys { sig: Self::public_of(&sig, "sig"), enc: Self::public_of(&enc, "enc") };
        DidKeys {
            did: Did::from_public(&public),
            public,
            secret: DidSecretKeys { sig: Bytes(sig.to_vec()), enc: Bytes(enc.to_vec()) },
        }
    }

    fn sign(&self, sk: &DidSecretKeys, msg: &[u8]) -> Vec<u8> {
        let key_id = Self::public_of(&sk.sig, "sig");
        let digest = tagged_hash("pnc/sym/sig/v1", &[msg]);
        self.with(|o| o.mint("sig", &key_id, digest, None)).to_bytes()
    }

    fn verify(&self, pk: &DidPublicKeys, msg: &[u8], sig: &[u8]) -> bool {
        let Ok(t) = SymbolicToken::from_bytes(sig) else { return false };
        t.digest.as_ref() == tagged_hash("pnc/sym/sig/v1", &[msg]) && self.with(|o| o.authentic(&t, "sig", &pk.sig))
    }

    fn pk_encrypt(&self, to: &DidPublicKeys, from: Option<&DidSecretKeys>, msg: &[u8], rng: &mut Drbg) -> Vec<u8> {
        let sender = from.map(|s| Self::public_of(&s.enc, "enc"));
        let digest = random_array(rng);
        let entry = Entry::Sealed { recipient: to.enc.clone(), plaintext: msg.to_vec(), sender };
        // The recipient stays inside the oracle, like a key-private ciphertext.
        self.with(|o| o.mint("enc", &[], digest, Some(entry))).to_bytes()
    }

    fn pk_decrypt(&self, sk: &DidSecretKeys, blob: &[u8]) -> Result<Opened, CryptoError> {
        let t = SymbolicToken::from_bytes(blob).map_err(|_| CryptoError::DecryptFailed)?;
        let own = Self::public_of(&sk.enc, "enc");
        self.with(|o| {
            if !o.authentic(&t, "enc", &[]) {
                return Err(CryptoError::DecryptFailed);
            }
            match o.entries.get(&t.handle) {
                Some(Entry::Sealed { recipient, plaintext, sender }) if *recipient == own => {
                    Ok(Opened { plaintext: plaintext.clone(), sender: sender.clone() })
                }
                _ => Err(CryptoError::DecryptFailed),
            }
        })
    }

    fn hmac_tag(&self, key: &ContractKey, msg: &[u8]) -> Vec<u8> {
        self.with(|o| hmac_sha256(&o.mac_key, &tagged_hash("pnc/sym/hmac/v1", &[&key.0, msg])))
    }

    fn issuer_keygen(
        &self,
        attr_count: usize,
        _modulus_bits: u64,
        rng: &mut Drbg,
    ) -> Result<(SymIssuerPublicKey, SymIssuerSecretKey), CryptoError> {
        if attr_count < RESERVED_SLOTS {
            return Err(CryptoError::Unsupported(format!("need at least {RESERVED_SLOTS} message slots")));
        }
        let secret: [u8; 32] = random_array(rng);
        Ok((
            SymIssuerPublicKey { key_id: Self::public_of(&secret, "issuer"), slots: attr_count as u64 },
            SymIssuerSecretKey { secret: Bytes(secret.to_vec()) },
        ))
    }

    fn attr_slots(&self, pk: &SymIssuerPublicKey) -> usize {
        pk.slots as usize
    }

    fn accumulator_setup(&self, _pk: &SymIssuerPublicKey, rng: &mut Drbg) -> (SymAccParams, BigUint) {
        let params = SymAccParams { registry_nonce: Bytes(random_array::<16>(rng).to_vec()) };
        let value = Self::acc_value(&params, &BTreeSet::new());
        self.with(|o| o.acc_sets.insert(value.clone(), BTreeSet::new()));
        (params, value)
    }

    fn blind_master_secret(
        &self,
        pk: &SymIssuerPublicKey,
        ms: &MasterSecret,
        offer_nonce: &[u8],
        _rng: &mut Drbg,
    ) -> (SymbolicToken, SymBlindingFactor) {
        let digest = tagged_hash("pnc/sym/blind/v1", &[offer_nonce]);
        let entry = Entry::Blinded { ms: ms.to_biguint() };
        let t = self.with(|o| o.mint("blind", &pk.key_id, digest, Some(entry)));
        let handle = t.handle;
        (t, SymBlindingFactor { handle })
    }

    fn verify_blinding(&self, pk: &SymIssuerPublicKey, blinded: &SymbolicToken, offer_nonce: &[u8]) -> bool {
        blinded.digest.as_ref() == tagged_hash("pnc/sym/blind/v1", &[offer_nonce])
            && self.with(|o| o.authentic(blinded, "blind", &pk.key_id))
    }

    fn new_revocation_index(&self, _sk: &SymIssuerSecretKey, rng: &mut Drbg) -> BigUint {
        random_bits(rng, REV_INDEX_BITS)
    }

    fn sign_credential(
        &self,
        pk: &SymIssuerPublicKey,
        sk: &SymIssuerSecretKey,
        blinded: &SymbolicToken,
        attrs: &[BigUint],
        rev_index: &BigUint,
        _rng: &mut Drbg,
    ) -> Result<SymbolicToken, CryptoError> {
        if Self::public_of(&sk.secret, "issuer") != pk.key_id {
            return Err(CryptoError::KeyMismatch("issuer secret key does not match public key"));
        }
        if attrs.len() + RESERVED_SLOTS != pk.slots as usize {
            return Err(CryptoError::SchemaMismatch);
        }
        self.with(|o| {
            if !o.authentic(blinded, "blind", &pk.key_id) {
                return Err(CryptoError::InvalidBlinding);
            }
            let Some(Entry::Blinded { ms }) = o.entries.get(&blinded.handle) else {
                return Err(CryptoError::InvalidBlinding);
            };
            let mut messages = vec![ms.clone(), rev_index.clone()];
            messages.extend_from_slice(attrs);
            let digest: [u8; 32] = random_array(&mut o.rng);
            let entry = Entry::Signed { messages };
            Ok(o.mint("cred", &pk.key_id, digest, Some(entry)))
        })
    }

    fn complete_credential(
        &self,
        pk: &SymIssuerPublicKey,
        pre: &SymbolicToken,
        factor: &SymBlindingFactor,
        ms: &MasterSecret,
        attrs: &[BigUint],
        rev_index: &BigUint,
    ) -> Result<SymCredential, CryptoError> {
        let mut expected = vec![ms.to_biguint(), rev_index.clone()];
        expected.extend_from_slice(attrs);
        self.with(|o| {
            if !o.authentic(pre, "cred", &pk.key_id) {
                return Err(CryptoError::InvalidSignature);
            }
            let blinded_ok =
                matches!(o.entries.get(&factor.handle), Some(Entry::Blinded { ms: m }) if *m == expected[0]);
            match o.entries.get(&pre.handle) {
                Some(Entry::Signed { messages, .. }) if blinded_ok && *messages == expected => {
                    Ok(SymCredential { token: pre.clone(), messages: expected.clone() })
                }
                _ => Err(CryptoError::InvalidSignature),
            }
        })
    }

    fn create_presentation(
        &self,
        pk: &SymIssuerPublicKey,
        cred: &SymCredential,
        attr_names: &[String],
        attr_raw: &[String],
        req: &ProofRequest,
        witness: &Witness,
        _acc: &SymAccParams,
        acc_value: &BigUint,
        _rng: &mut Drbg,
    ) -> Result<SymPresentation, CryptoError> {
        if witness.version != req.registry_version {
            return Err(CryptoError::StaleWitness { have: witness.version, want: req.registry_version });
        }
        if attr_names.len() != attr_raw.len() || !req.requested_reveal.iter().all(|r| attr_names.contains(r)) {
            return Err(CryptoError::SchemaMismatch);
        }
        if &witness.value != acc_value || !self.member(&cred.messages[1], acc_value) {
            return Err(CryptoError::Revoked);
        }
        let revealed: BTreeMap<String, String> = attr_names
            .iter()
            .zip(attr_raw)
            .filter(|(n, _)| req.requested_reveal.contains(*n))
            .map(|(n, v)| (n.clone(), v.clone()))
            .collect();
        let digest = Self::presentation_digest(req, &revealed, acc_value);
        self.with(|o| {
            let valid = o.authentic(&cred.token, "cred", &pk.key_id)
                && matches!(o.entries.get(&cred.token.handle), Some(Entry::Signed { messages, .. }) if *messages == cred.messages);
            if !valid {
                return Err(CryptoError::InvalidSignature);
            }
            let attrs_ok = attr_raw
                .iter()
                .enumerate()
                .all(|(i, raw)| cred.messages.get(i + RESERVED_SLOTS) == Some(&super::encode_attribute(raw)));
            if !attrs_ok {
                return Err(CryptoError::SchemaMismatch);
            }
            // A fresh handle per presentation keeps tokens unlinkable.
            let ms = cred.messages[0].clone();
            let entry = Entry::Blinded { ms };
            Ok(SymPresentation { token: o.mint("pres", &pk.key_id, digest, Some(entry)), revealed })
        })
    }

    fn verify_presentation(
        &self,
        pk: &SymIssuerPublicKey,
        attr_names: &[String],
        pres: &SymPresentation,
        req: &ProofRequest,
        _acc: &SymAccParams,
        acc_value: &BigUint,
    ) -> bool {
        let names: BTreeSet<String> = pres.revealed.keys().cloned().collect();
        names == req.requested_reveal
            && names.iter().all(|n| attr_names.contains(n))
            && pres.token.digest.as_ref() == Self::presentation_digest(req, &pres.revealed, acc_value)
            && self.with(|o| o.authentic(&pres.token, "pres", &pk.key_id))
    }

    fn accumulate(
        &self,
        acc: &SymAccParams,
        _sk: Option<&SymIssuerSecretKey>,
        _value: &BigUint,
        _op: &DeltaOp,
        active_after: &BTreeSet<BigUint>,
    ) -> Result<BigUint, CryptoError> {
        let value = Self::acc_value(acc, active_after);
        self.with(|o| o.acc_sets.insert(value.clone(), active_after.clone()));
        Ok(value)
    }

    fn initial_witness(&self, _before: &BigUint, after: &BigUint) -> BigUint {
        after.clone()
    }

    fn witness_update(
        &self,
        _acc: &SymAccParams,
        own: &BigUint,
        witness: &Witness,
        deltas: &[DeltaEntry],
        new_value: &BigUint,
    ) -> Result<Witness, CryptoError> {
        let mut version = witness.version;
        for d in deltas.iter().filter(|d| d.version > witness.version) {
            if d.version != version + 1 {
                return Err(CryptoError::StaleWitness { have: version, want: d.version - 1 });
            }
            if matches!(&d.op, DeltaOp::Remove(e) if e == own) {
                return Err(CryptoError::Revoked);
            }
            version = d.version;
        }
        if !self.member(own, new_value) {
            return Err(CryptoError::WitnessMismatch);
        }
        Ok(Witness { value: new_value.clone(), version })
    }

    fn witness_valid(&self, _acc: &SymAccParams, own: &BigUint, witness: &BigUint, value: &BigUint) -> bool {
        witness == value && self.member(own, value)
    }
}
