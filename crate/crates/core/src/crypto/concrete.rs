use std::collections::BTreeSet;

use num_bigint::BigUint;

use super::bigint::random_prime;
use super::cl::{
    self, ClAccParams, ClBlindedSecret, ClBlindingFactor, ClCredential, ClIssuerPublicKey, ClIssuerSecretKey,
    ClPreCredential, ClPresentation,
};
use super::{accumulator, identity};
use super::{
    ContractKey, CryptoError, CryptoSuite, DeltaEntry, DeltaOp, DidKeys, DidPublicKeys, DidSecretKeys, Drbg,
    MasterSecret, Opened, ProofRequest, Witness,
};

/// Real cryptography: Ed25519, X25519 sealed boxes, HMAC-SHA256, CL-RSA
/// credentials and an RSA accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Concrete;

const REV_INDEX_BITS: u64 = 256;

impl CryptoSuite for Concrete {
    const NAME: &'static str = "concrete";

    type IssuerPublicKey = ClIssuerPublicKey;
    type IssuerSecretKey = ClIssuerSecretKey;
    type BlindedSecret = ClBlindedSecret;
    type BlindingFactor = ClBlindingFactor;
    type PreCredential = ClPreCredential;
    type Credential = ClCredential;
    type Presentation = ClPresentation;
    type AccParams = ClAccParams;

    fn gen_did_keys(&self, rng: &mut Drbg) -> DidKeys {
        identity::gen_did_keys(rng)
    }

    fn sign(&self, sk: &DidSecretKeys, msg: &[u8]) -> Vec<u8> {
        identity::sign(sk, msg)
    }

    fn verify(&self, pk: &DidPublicKeys, msg: &[u8], sig: &[u8]) -> bool {
        identity::verify(pk, msg, sig)
    }

    fn pk_encrypt(&self, to: &DidPublicKeys, from: Option<&DidSecretKeys>, msg: &[u8], rng: &mut Drbg) -> Vec<u8> {
        identity::seal(to, from, msg, rng)
    }

    fn pk_decrypt(&self, sk: &DidSecretKeys, blob: &[u8]) -> Result<Opened, CryptoError> {
        identity::open(sk, blob)
    }

    fn hmac_tag(&self, key: &ContractKey, msg: &[u8]) -> Vec<u8> {
        identity::hmac_tag(key, msg)
    }

    fn issuer_keygen(
        &self,
        attr_count: usize,
        modulus_bits: u64,
        rng: &mut Drbg,
    ) -> Result<(ClIssuerPublicKey, ClIssuerSecretKey), CryptoError> {
        cl::keygen(attr_count, modulus_bits, rng)
    }

    fn attr_slots(&self, pk: &ClIssuerPublicKey) -> usize {
        pk.r.len()
    }

    fn accumulator_setup(&self, pk: &ClIssuerPublicKey, rng: &mut Drbg) -> (ClAccParams, BigUint) {
        let params = accumulator::setup(&pk.n, rng);
        let initial = params.base.clone();
        (params, initial)
    }

    fn blind_master_secret(
        &self,
        pk: &ClIssuerPublicKey,
        ms: &MasterSecret,
        offer_nonce: &[u8],
        rng: &mut Drbg,
    ) -> (ClBlindedSecret, ClBlindingFactor) {
        cl::blind(pk, &ms.to_biguint(), offer_nonce, rng)
    }

    fn verify_blinding(&self, pk: &ClIssuerPublicKey, blinded: &ClBlindedSecret, offer_nonce: &[u8]) -> bool {
        cl::verify_blinding(pk, blinded, offer_nonce)
    }

    fn new_revocation_index(&self, sk: &ClIssuerSecretKey, rng: &mut Drbg) -> BigUint {
        loop {
            let e = random_prime(rng, REV_INDEX_BITS);
            if e != sk.p_prime && e != sk.q_prime {
                return e;
            }
        }
    }

    fn sign_credential(
        &self,
        pk: &ClIssuerPublicKey,
        sk: &ClIssuerSecretKey,
        blinded: &ClBlindedSecret,
        attrs: &[BigUint],
        rev_index: &BigUint,
        rng: &mut Drbg,
    ) -> Result<ClPreCredential, CryptoError> {
        cl::sign(pk, sk, blinded, attrs, rev_index, rng)
    }

    fn complete_credential(
        &self,
        pk: &ClIssuerPublicKey,
        pre: &ClPreCredential,
        factor: &ClBlindingFactor,
        ms: &MasterSecret,
        attrs: &[BigUint],
        rev_index: &BigUint,
    ) -> Result<ClCredential, CryptoError> {
        cl::complete(pk, pre, factor, &ms.to_biguint(), attrs, rev_index)
    }

    fn create_presentation(
        &self,
        pk: &ClIssuerPublicKey,
        cred: &ClCredential,
        attr_names: &[String],
        attr_raw: &[String],
        req: &ProofRequest,
        witness: &Witness,
        acc: &ClAccParams,
        acc_value: &BigUint,
        rng: &mut Drbg,
    ) -> Result<ClPresentation, CryptoError> {
        if witness.version != req.registry_version {
            return Err(CryptoError::StaleWitness { have: witness.version, want: req.registry_version });
        }
        cl::present(pk, cred, attr_names, attr_raw, req, &witness.value, acc, acc_value, rng)
    }

    fn verify_presentation(
        &self,
        pk: &ClIssuerPublicKey,
        attr_names: &[String],
        pres: &ClPresentation,
        req: &ProofRequest,
        acc: &ClAccParams,
        acc_value: &BigUint,
    ) -> bool {
        cl::verify(pk, attr_names, pres, req, acc, acc_value)
    }

    fn accumulate(
        &self,
        acc: &ClAccParams,
        sk: Option<&ClIssuerSecretKey>,
        value: &BigUint,
        op: &DeltaOp,
        _active_after: &BTreeSet<BigUint>,
    ) -> Result<BigUint, CryptoError> {
        match op {
            DeltaOp::Add(e) => Ok(accumulator::add(acc, value, e)),
            DeltaOp::Remove(e) => {
                let sk = sk.ok_or(CryptoError::KeyMismatch("removal needs the issuer secret key"))?;
                accumulator::remove(acc, &sk.order(), value, e)
            }
        }
    }

    fn initial_witness(&self, before: &BigUint, _after: &BigUint) -> BigUint {
        before.clone()
    }

    fn witness_update(
        &self,
        acc: &ClAccParams,
        own: &BigUint,
        witness: &Witness,
        deltas: &[DeltaEntry],
        new_value: &BigUint,
    ) -> Result<Witness, CryptoError> {
        let mut w = witness.value.clone();
        let mut version = witness.version;
        for d in deltas.iter().filter(|d| d.version > witness.version) {
            if d.version != version + 1 {
                return Err(CryptoError::StaleWitness { have: version, want: d.version - 1 });
            }
            w = match &d.op {
                DeltaOp::Add(e) => accumulator::witness_after_add(acc, &w, e),
                DeltaOp::Remove(e) if e == own => return Err(CryptoError::Revoked),
                DeltaOp::Remove(e) => accumulator::witness_after_remove(acc, &w, own, e, &d.value)?,
            };
            version = d.version;
        }
        if !accumulator::is_member(acc, own, &w, new_value) {
            return Err(CryptoError::WitnessMismatch);
        }
        Ok(Witness { value: w, version })
    }

    fn witness_valid(&self, acc: &ClAccParams, own: &BigUint, witness: &BigUint, value: &BigUint) -> bool {
        accumulator::is_member(acc, own, witness, value)
    }
}
