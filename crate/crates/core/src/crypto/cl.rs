//! CL-RSA signatures with blinded issuance and selective-disclosure proofs.
//!
//! Message slot 0 holds the holder's master secret, slot 1 the revocation
//! index `e_rev`, and slots 2.. the schema attributes. Presentations prove
//! knowledge of a signature over all slots together with accumulator
//! membership of `e_rev`; the two proofs share the response for slot 1.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use super::accumulator::random_qr;
use super::bigint::{
    mod_inverse, multi_pow, pow_signed, random_bits, random_exact_bits, random_prime_in_interval, random_safe_prime,
};
use super::{
    encode_attribute, tagged_hash, CryptoError, Drbg, PresentationView, ProofRequest, RESERVED_SLOTS,
    SLOT_MASTER_SECRET, SLOT_REV_INDEX,
};
use crate::codec::{tags, Wire};
use crate::wire_record;

const DOMAIN_BLINDING: &str = "pnc/cl/blinding/v1";
const DOMAIN_PRESENTATION: &str = "pnc/cl/presentation/v1";

/// Bit lengths of secrets, exponents and proof paddings.
///
/// Sizes tied to the message space, the challenge and `e` are fixed; sizes
/// tied to the modulus scale with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClParams {
    pub modulus_bits: u64,
}

impl ClParams {
    pub const MESSAGE_BITS: u64 = 256;
    pub const CHALLENGE_BITS: u64 = 256;
    pub const STAT_BITS: u64 = 80;
    pub const E_START: u64 = 596;
    pub const E_RANGE: u64 = 119;
    pub const E_TILDE: u64 = 456;
    pub const M_TILDE: u64 = 593;
    /// Challenge plus statistical zero-knowledge slack.
    pub const PAD: u64 = Self::CHALLENGE_BITS + Self::STAT_BITS;

    pub fn new(modulus_bits: u64) -> Self {
        Self { modulus_bits }
    }

    pub fn v_prime(&self) -> u64 {
        self.modulus_bits + Self::STAT_BITS
    }

    pub fn v_prime_prime(&self) -> u64 {
        (2724 * self.modulus_bits).div_ceil(2048)
    }

    pub fn v_prime_tilde(&self) -> u64 {
        self.v_prime() + Self::PAD
    }

    pub fn v_tilde(&self) -> u64 {
        self.v_prime_prime().max(Self::E_START + 1 + self.v_prime()) + Self::PAD
    }

    /// Commitment randomness in the accumulator proof.
    pub fn acc_r(&self) -> u64 {
        self.modulus_bits - 2
    }

    pub fn acc_r_tilde(&self) -> u64 {
        self.acc_r() + Self::PAD
    }

    /// Padding for responses to products `e_rev * r`.
    pub fn acc_prod_tilde(&self) -> u64 {
        self.acc_r() + Self::MESSAGE_BITS + Self::PAD
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClIssuerPublicKey {
    pub n: BigUint,
    pub s: BigUint,
    pub z: BigUint,
    pub r: Vec<BigUint>,
    pub modulus_bits: u64,
}

wire_record!(ClIssuerPublicKey = tags::CL_ISSUER_PUBLIC_KEY; { n, s, z, r, modulus_bits });

impl ClIssuerPublicKey {
    pub fn params(&self) -> ClParams {
        ClParams::new(self.modulus_bits)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct ClIssuerSecretKey {
    pub p: BigUint,
    pub q: BigUint,
    pub p_prime: BigUint,
    pub q_prime: BigUint,
    pub x_z: BigUint,
    pub x_r: Vec<BigUint>,
}

wire_record!(ClIssuerSecretKey = tags::CL_ISSUER_SECRET_KEY; { p, q, p_prime, q_prime, x_z, x_r });

impl std::fmt::Debug for ClIssuerSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ClIssuerSecretKey(..)")
    }
}

impl ClIssuerSecretKey {
    /// Order of the quadratic-residue subgroup.
    pub fn order(&self) -> BigUint {
        &self.p_prime * &self.q_prime
    }
}

/// Blinded master secret `U` with a proof of knowledge of its opening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClBlindedSecret {
    pub u: BigUint,
    pub challenge: BigUint,
    pub v_prime_hat: BigUint,
    pub ms_hat: BigUint,
}

wire_record!(ClBlindedSecret = tags::CL_BLINDED_SECRET; { u, challenge, v_prime_hat, ms_hat });

#[derive(Clone, PartialEq, Eq)]
pub struct ClBlindingFactor {
    pub v_prime: BigUint,
}

wire_record!(ClBlindingFactor = tags::CL_BLINDING_FACTOR; { v_prime });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClPreCredential {
    pub a: BigUint,
    pub e: BigUint,
    pub v_prime_prime: BigUint,
}

wire_record!(ClPreCredential = tags::CL_PRE_CREDENTIAL; { a, e, v_prime_prime });

/// A completed signature together with every signed message.
#[derive(Clone, PartialEq, Eq)]
pub struct ClCredential {
    pub a: BigUint,
    pub e: BigUint,
    pub v: BigUint,
    pub messages: Vec<BigUint>,
}

wire_record!(ClCredential = tags::CL_CREDENTIAL; { a, e, v, messages });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClAccParams {
    pub modulus: BigUint,
    pub base: BigUint,
    pub g: BigUint,
    pub h: BigUint,
}

wire_record!(ClAccParams = tags::CL_ACC_PARAMS; { modulus, base, g, h });

/// Commitments and responses proving `w^(e_rev) = V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClNonRevProof {
    pub c_e: BigUint,
    pub c_u: BigUint,
    pub c_r: BigUint,
    pub beta_hat: BigUint,
    pub gamma_hat: BigUint,
    pub delta_hat: BigUint,
    pub epsilon_hat: BigUint,
    pub zeta_hat: BigUint,
}

wire_record!(ClNonRevProof = tags::CL_NONREV_PROOF; {
    c_e, c_u, c_r, beta_hat, gamma_hat, delta_hat, epsilon_hat, zeta_hat
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClPresentation {
    pub a_prime: BigUint,
    pub challenge: BigUint,
    pub e_hat: BigUint,
    pub v_hat: BigUint,
    /// Responses for hidden slots, keyed by slot index.
    pub m_hat: BTreeMap<u64, BigUint>,
    pub revealed: BTreeMap<String, String>,
    pub nonrev: ClNonRevProof,
}

wire_record!(ClPresentation = tags::CL_PRESENTATION; {
    a_prime, challenge, e_hat, v_hat, m_hat, revealed, nonrev
});

impl PresentationView for ClPresentation {
    fn revealed(&self) -> &BTreeMap<String, String> {
        &self.revealed
    }
}

fn hash_to_int(domain: &str, parts: &[&BigUint], context: &[&[u8]]) -> BigUint {
    let encoded: Vec<Vec<u8>> = parts.iter().map(|p| p.to_bytes()).collect();
    let mut all: Vec<&[u8]> = context.to_vec();
    all.extend(encoded.iter().map(Vec::as_slice));
    BigUint::from_bytes_be(&tagged_hash(domain, &all))
}

fn is_unit_in_range(x: &BigUint, n: &BigUint) -> bool {
    x > &BigUint::one() && x < n && mod_inverse(x, n).is_some()
}

pub fn keygen(
    slots: usize,
    modulus_bits: u64,
    rng: &mut Drbg,
) -> Result<(ClIssuerPublicKey, ClIssuerSecretKey), CryptoError> {
    if slots < RESERVED_SLOTS {
        return Err(CryptoError::Unsupported(format!("need at least {RESERVED_SLOTS} message slots")));
    }
    if modulus_bits < 256 || !modulus_bits.is_multiple_of(2) {
        return Err(CryptoError::Unsupported(format!("modulus size {modulus_bits}")));
    }
    let (p, p_prime) = random_safe_prime(rng, modulus_bits / 2);
    let (q, q_prime) = loop {
        let candidate = random_safe_prime(rng, modulus_bits / 2);
        if candidate.0 != p {
            break candidate;
        }
    };
    let n = &p * &q;
    let order = &p_prime * &q_prime;
    // A random QR generates the whole QR subgroup unless its order is p' or q'.
    let s = loop {
        let s = random_qr(rng, &n);
        if !s.modpow(&p_prime, &n).is_one() && !s.modpow(&q_prime, &n).is_one() {
            break s;
        }
    };
    let exponent = |rng: &mut Drbg| loop {
        let x = super::bigint::random_below(rng, &order);
        if x > BigUint::one() {
            break x;
        }
    };
    let x_z = exponent(rng);
    let x_r: Vec<BigUint> = (0..slots).map(|_| exponent(rng)).collect();
    let pk = ClIssuerPublicKey {
        z: s.modpow(&x_z, &n),
        r: x_r.iter().map(|x| s.modpow(x, &n)).collect(),
        s,
        n,
        modulus_bits,
    };
    let sk = ClIssuerSecretKey { p, q, p_prime, q_prime, x_z, x_r };
    Ok((pk, sk))
}

pub fn blind(
    pk: &ClIssuerPublicKey,
    ms: &BigUint,
    nonce: &[u8],
    rng: &mut Drbg,
) -> (ClBlindedSecret, ClBlindingFactor) {
    let params = pk.params();
    let n = &pk.n;
    let r_ms = &pk.r[SLOT_MASTER_SECRET];
    let v_prime = random_bits(rng, params.v_prime());
    let u = multi_pow(&[(&pk.s, &v_prime), (r_ms, ms)], n);
    let v_tilde = random_bits(rng, params.v_prime_tilde());
    let ms_tilde = random_bits(rng, ClParams::M_TILDE);
    let u_tilde = multi_pow(&[(&pk.s, &v_tilde), (r_ms, &ms_tilde)], n);
    let challenge = hash_to_int(DOMAIN_BLINDING, &[&u, &u_tilde], &[nonce]);
    let blinded = ClBlindedSecret {
        v_prime_hat: v_tilde + &challenge * &v_prime,
        ms_hat: ms_tilde + &challenge * ms,
        u,
        challenge,
    };
    (blinded, ClBlindingFactor { v_prime })
}

pub fn verify_blinding(pk: &ClIssuerPublicKey, b: &ClBlindedSecret, nonce: &[u8]) -> bool {
    let n = &pk.n;
    if !is_unit_in_range(&b.u, n) {
        return false;
    }
    let params = pk.params();
    if b.ms_hat.bits() > ClParams::M_TILDE + 1 || b.v_prime_hat.bits() > params.v_prime_tilde() + 1 {
        return false;
    }
    let neg_c = -BigInt::from(b.challenge.clone());
    let u_tilde = pow_signed(&b.u, &neg_c, n)
        * multi_pow(&[(&pk.s, &b.v_prime_hat), (&pk.r[SLOT_MASTER_SECRET], &b.ms_hat)], n)
        % n;
    hash_to_int(DOMAIN_BLINDING, &[&b.u, &u_tilde], &[nonce]) == b.challenge
}

/// Product of `R_i^m_i` over the known messages, starting at slot 1.
fn known_product(pk: &ClIssuerPublicKey, rev_index: &BigUint, attrs: &[BigUint]) -> BigUint {
    let mut terms = vec![(&pk.r[SLOT_REV_INDEX], rev_index)];
    terms.extend(pk.r[RESERVED_SLOTS..].iter().zip(attrs));
    multi_pow(&terms, &pk.n)
}

pub fn sign(
    pk: &ClIssuerPublicKey,
    sk: &ClIssuerSecretKey,
    blinded: &ClBlindedSecret,
    attrs: &[BigUint],
    rev_index: &BigUint,
    rng: &mut Drbg,
) -> Result<ClPreCredential, CryptoError> {
    if attrs.len() + RESERVED_SLOTS != pk.r.len() {
        return Err(CryptoError::SchemaMismatch);
    }
    let params = pk.params();
    let n = &pk.n;
    let order = sk.order();
    let e = random_prime_in_interval(rng, ClParams::E_START, ClParams::E_RANGE);
    let v_prime_prime = random_exact_bits(rng, params.v_prime_prime());
    let denom = &blinded.u * pk.s.modpow(&v_prime_prime, n) % n * known_product(pk, rev_index, attrs) % n;
    let q = &pk.z * mod_inverse(&denom, n).ok_or(CryptoError::InvalidBlinding)? % n;
    let d = mod_inverse(&e, &order).ok_or(CryptoError::Unsupported("e not invertible".into()))?;
    Ok(ClPreCredential { a: q.modpow(&d, n), e, v_prime_prime })
}

/// `A^e * S^v * prod R_i^m_i == Z`.
pub fn verify_signature(pk: &ClIssuerPublicKey, a: &BigUint, e: &BigUint, v: &BigUint, messages: &[BigUint]) -> bool {
    if messages.len() != pk.r.len() || !is_unit_in_range(a, &pk.n) {
        return false;
    }
    let mut terms = vec![(a, e), (&pk.s, v)];
    terms.extend(pk.r.iter().zip(messages));
    multi_pow(&terms, &pk.n) == pk.z
}

pub fn complete(
    pk: &ClIssuerPublicKey,
    pre: &ClPreCredential,
    factor: &ClBlindingFactor,
    ms: &BigUint,
    attrs: &[BigUint],
    rev_index: &BigUint,
) -> Result<ClCredential, CryptoError> {
    let v = &factor.v_prime + &pre.v_prime_prime;
    let mut messages = vec![ms.clone(), rev_index.clone()];
    messages.extend_from_slice(attrs);
    let e_ok = pre.e.bits() == ClParams::E_START + 1
        && pre.e < (BigUint::one() << ClParams::E_START) + (BigUint::one() << ClParams::E_RANGE);
    if !e_ok || !verify_signature(pk, &pre.a, &pre.e, &v, &messages) {
        return Err(CryptoError::InvalidSignature);
    }
    Ok(ClCredential { a: pre.a.clone(), e: pre.e.clone(), v, messages })
}

/// Hidden message slots for a reveal set.
fn hidden_slots(attr_names: &[String], reveal: &BTreeSet<String>) -> Vec<usize> {
    let mut slots = vec![SLOT_MASTER_SECRET, SLOT_REV_INDEX];
    slots.extend(
        attr_names.iter().enumerate().filter(|(_, name)| !reveal.contains(*name)).map(|(i, _)| i + RESERVED_SLOTS),
    );
    slots
}

fn presentation_challenge(req: &ProofRequest, revealed: &BTreeMap<String, String>, values: &[&BigUint]) -> BigUint {
    let req_bytes = req.to_bytes();
    let revealed_bytes = revealed.to_bytes();
    hash_to_int(DOMAIN_PRESENTATION, values, &[&req_bytes, &revealed_bytes])
}

struct NonRevSecrets {
    r1: BigUint,
    r2: BigUint,
    r3: BigUint,
    beta: BigUint,
    gamma: BigUint,
    delta: BigUint,
    epsilon: BigUint,
    zeta: BigUint,
}

#[allow(clippy::too_many_arguments)]
pub fn present(
    pk: &ClIssuerPublicKey,
    cred: &ClCredential,
    attr_names: &[String],
    attr_raw: &[String],
    req: &ProofRequest,
    witness: &BigUint,
    acc: &ClAccParams,
    acc_value: &BigUint,
    rng: &mut Drbg,
) -> Result<ClPresentation, CryptoError> {
    if attr_names.len() != attr_raw.len() || attr_names.len() + RESERVED_SLOTS != cred.messages.len() {
        return Err(CryptoError::SchemaMismatch);
    }
    if !req.requested_reveal.iter().all(|r| attr_names.contains(r)) {
        return Err(CryptoError::SchemaMismatch);
    }
    let e_rev = &cred.messages[SLOT_REV_INDEX];
    if &witness.modpow(e_rev, &acc.modulus) != acc_value {
        return Err(CryptoError::Revoked);
    }
    let params = pk.params();
    let n = &pk.n;
    let revealed: BTreeMap<String, String> = attr_names
        .iter()
        .zip(attr_raw)
        .filter(|(name, _)| req.requested_reveal.contains(*name))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let hidden = hidden_slots(attr_names, &req.requested_reveal);
    let e_prime = BigInt::from(&cred.e - (BigUint::one() << ClParams::E_START));
    let big = |x: &BigUint| BigInt::from(x.clone());

    loop {
        let r = random_bits(rng, params.v_prime());
        let a_prime = &cred.a * pk.s.modpow(&r, n) % n;
        let v_prime = big(&cred.v) - big(&cred.e) * big(&r);

        let e_tilde = random_bits(rng, ClParams::E_TILDE);
        let v_tilde = random_bits(rng, params.v_tilde());
        let m_tilde: Vec<BigUint> = hidden.iter().map(|_| random_bits(rng, ClParams::M_TILDE)).collect();
        let mut terms = vec![(&a_prime, &e_tilde), (&pk.s, &v_tilde)];
        terms.extend(hidden.iter().map(|&i| &pk.r[i]).zip(&m_tilde));
        let t = multi_pow(&terms, n);

        let an = &acc.modulus;
        let s = NonRevSecrets {
            r1: random_bits(rng, params.acc_r()),
            r2: random_bits(rng, params.acc_r()),
            r3: random_bits(rng, params.acc_r()),
            beta: random_bits(rng, params.acc_r_tilde()),
            gamma: random_bits(rng, params.acc_prod_tilde()),
            delta: random_bits(rng, params.acc_prod_tilde()),
            epsilon: random_bits(rng, params.acc_r_tilde()),
            zeta: random_bits(rng, params.acc_r_tilde()),
        };
        let alpha = &m_tilde[1];
        let c_e = multi_pow(&[(&acc.g, e_rev), (&acc.h, &s.r1)], an);
        let c_u = witness * acc.h.modpow(&s.r2, an) % an;
        let c_r = multi_pow(&[(&acc.g, &s.r2), (&acc.h, &s.r3)], an);
        let t1 = multi_pow(&[(&acc.g, alpha), (&acc.h, &s.beta)], an);
        let t2 = c_u.modpow(alpha, an) * pow_signed(&acc.h, &-big(&s.gamma), an) % an;
        let t3 = c_r.modpow(alpha, an) * pow_signed(&acc.h, &-big(&s.delta), an) % an
            * pow_signed(&acc.g, &-big(&s.gamma), an)
            % an;
        let t4 = multi_pow(&[(&acc.g, &s.epsilon), (&acc.h, &s.zeta)], an);

        let c = presentation_challenge(req, &revealed, &[&a_prime, &c_e, &c_u, &c_r, &t, &t1, &t2, &t3, &t4]);
        let cb = big(&c);
        let v_hat = big(&v_tilde) + &cb * &v_prime;
        let Some(v_hat) = v_hat.to_biguint() else { continue };
        let e_hat = (big(&e_tilde) + &cb * &e_prime).to_biguint().expect("e' is positive");
        let m_hat = hidden.iter().zip(&m_tilde).map(|(&i, mt)| (i as u64, mt + &c * &cred.messages[i])).collect();
        let nonrev = ClNonRevProof {
            beta_hat: &s.beta + &c * &s.r1,
            gamma_hat: &s.gamma + &c * e_rev * &s.r2,
            delta_hat: &s.delta + &c * e_rev * &s.r3,
            epsilon_hat: &s.epsilon + &c * &s.r2,
            zeta_hat: &s.zeta + &c * &s.r3,
            c_e,
            c_u,
            c_r,
        };
        return Ok(ClPresentation { a_prime, challenge: c, e_hat, v_hat, m_hat, revealed, nonrev });
    }
}

pub fn verify(
    pk: &ClIssuerPublicKey,
    attr_names: &[String],
    pres: &ClPresentation,
    req: &ProofRequest,
    acc: &ClAccParams,
    acc_value: &BigUint,
) -> bool {
    let n = &pk.n;
    let an = &acc.modulus;
    let params = pk.params();
    if attr_names.len() + RESERVED_SLOTS != pk.r.len() {
        return false;
    }
    let revealed_names: BTreeSet<String> = pres.revealed.keys().cloned().collect();
    if revealed_names != req.requested_reveal || !revealed_names.iter().all(|r| attr_names.contains(r)) {
        return false;
    }
    let hidden = hidden_slots(attr_names, &req.requested_reveal);
    let hidden_keys: Vec<u64> = pres.m_hat.keys().copied().collect();
    if hidden_keys != hidden.iter().map(|&i| i as u64).collect::<Vec<_>>() {
        return false;
    }
    if !is_unit_in_range(&pres.a_prime, n)
        || ![&pres.nonrev.c_e, &pres.nonrev.c_u, &pres.nonrev.c_r, acc_value].iter().all(|x| is_unit_in_range(x, an))
    {
        return false;
    }
    if pres.e_hat.bits() > ClParams::E_TILDE + 1 || pres.m_hat.values().any(|m| m.bits() > ClParams::M_TILDE + 1) {
        return false;
    }
    if pres.v_hat.bits() > params.v_tilde() + 1 {
        return false;
    }
    let neg_c = -BigInt::from(pres.challenge.clone());

    // Z / (prod revealed R_i^m_i * A'^(2^E_START))
    let mut revealed_terms: Vec<(BigUint, BigUint)> = Vec::new();
    for (i, name) in attr_names.iter().enumerate() {
        if let Some(raw) = pres.revealed.get(name) {
            revealed_terms.push((pk.r[i + RESERVED_SLOTS].clone(), encode_attribute(raw)));
        }
    }
    let two_e = BigUint::one() << ClParams::E_START;
    revealed_terms.push((pres.a_prime.clone(), two_e));
    let denom = multi_pow(&revealed_terms.iter().map(|(b, e)| (b, e)).collect::<Vec<_>>(), n);
    let Some(denom_inv) = mod_inverse(&denom, n) else { return false };
    let z_adj = &pk.z * denom_inv % n;
    let mut terms = vec![(&pres.a_prime, &pres.e_hat), (&pk.s, &pres.v_hat)];
    terms.extend(pres.m_hat.iter().map(|(&i, m)| (&pk.r[i as usize], m)));
    let t = pow_signed(&z_adj, &neg_c, n) * multi_pow(&terms, n) % n;

    let nr = &pres.nonrev;
    let alpha_hat = &pres.m_hat[&(SLOT_REV_INDEX as u64)];
    let neg = |x: &BigUint| -BigInt::from(x.clone());
    let t1 = pow_signed(&nr.c_e, &neg_c, an) * multi_pow(&[(&acc.g, alpha_hat), (&acc.h, &nr.beta_hat)], an) % an;
    let t2 = pow_signed(acc_value, &neg_c, an) * nr.c_u.modpow(alpha_hat, an) % an
        * pow_signed(&acc.h, &neg(&nr.gamma_hat), an)
        % an;
    let t3 = nr.c_r.modpow(alpha_hat, an) * pow_signed(&acc.h, &neg(&nr.delta_hat), an) % an
        * pow_signed(&acc.g, &neg(&nr.gamma_hat), an)
        % an;
    let t4 = pow_signed(&nr.c_r, &neg_c, an) * multi_pow(&[(&acc.g, &nr.epsilon_hat), (&acc.h, &nr.zeta_hat)], an) % an;

    let c = presentation_challenge(
        req,
        &pres.revealed,
        &[&pres.a_prime, &nr.c_e, &nr.c_u, &nr.c_r, &t, &t1, &t2, &t3, &t4],
    );
    !c.is_zero() && c == pres.challenge
}

/// Integer encodings of raw attribute values.
pub fn encode_attributes(raw: &[String]) -> Vec<BigUint> {
    raw.iter().map(|r| encode_attribute(r)).collect()
}
