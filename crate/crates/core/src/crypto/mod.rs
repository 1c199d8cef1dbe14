//! Cryptographic building blocks behind one [`CryptoSuite`] interface.
//!
//! Two suites implement it:
//!
//! * [`Concrete`]: Ed25519 signatures, X25519 + ChaCha20-Poly1305 sealed
//!   boxes, HMAC-SHA256, CL-RSA anonymous credentials with blinded issuance
//!   and selective-disclosure presentations, and an RSA accumulator in the
//!   issuer's hidden-order group for revocation.
//! * [`Symbolic`]: opaque tokens minted by an oracle under perfect-crypto
//!   rules. Nothing secret ever leaves the oracle, which makes secrecy and
//!   agreement checks exact and keeps protocol tests fast.
//!
//! Protocol code is generic over the suite; every value a suite produces is
//! [`Wire`]-encodable so it can travel inside messages and ledger records.

pub mod accumulator;
pub mod bigint;
pub mod cl;
mod concrete;
mod contract_auth;
mod identity;
pub mod keystore;
mod registry;
mod symbolic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{tags, Bytes, CodecError, Wire, WireValue};
use crate::wire_record;

pub use cl::ClParams;
pub use concrete::Concrete;
pub use contract_auth::{
    check_contract_auth, make_contract_auth, ContractAuthPayload, ContractStore, DEFAULT_WINDOW_SECS,
};
pub use registry::{issue_credential, DeltaEntry, DeltaOp, Issuance, RevocationRegistry};
pub use symbolic::{
    SymAccParams, SymBlindingFactor, SymCredential, SymIssuerPublicKey, SymIssuerSecretKey, SymPresentation, Symbolic,
    SymbolicToken,
};

/// Deterministic random bit generator used throughout.
pub type Drbg = rand_chacha::ChaCha20Rng;

/// Derives an independent generator from a 64-bit seed and a label.
pub fn drbg(seed: u64, label: &str) -> Drbg {
    let mut h = Sha256::new();
    h.update(b"pnc/drbg/v1");
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    Drbg::from_seed(h.finalize().into())
}

/// A generator seeded from operating-system entropy.
pub fn drbg_from_entropy() -> Drbg {
    Drbg::from_entropy()
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

/// Domain-separated hash over length-prefixed parts.
pub fn tagged_hash(domain: &str, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain.as_bytes());
    for p in parts {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

pub fn random_array<const N: usize>(rng: &mut Drbg) -> [u8; N] {
    let mut out = [0u8; N];
    rng.fill_bytes(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("decryption failed")]
    DecryptFailed,
    #[error("blinded secret correctness proof rejected")]
    InvalidBlinding,
    #[error("attributes do not match the credential schema")]
    SchemaMismatch,
    #[error("credential signature does not verify")]
    InvalidSignature,
    #[error("witness version {have} does not match requested version {want}")]
    StaleWitness { have: u64, want: u64 },
    #[error("credential has been revoked")]
    Revoked,
    #[error("element is not a member of the accumulator")]
    UnknownElement,
    #[error("witness does not match the accumulator value")]
    WitnessMismatch,
    #[error("element is already a member of the accumulator")]
    DuplicateElement,
    #[error("contract authentication tag mismatch")]
    BadTag,
    #[error("contract authentication timestamp outside the acceptance window")]
    Expired,
    #[error("contract authentication data already seen")]
    Replayed,
    #[error("unknown contract")]
    UnknownContract,
    #[error("key material mismatch: {0}")]
    KeyMismatch(&'static str),
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// A decentralized identifier: `did:pnc:` followed by 32 lowercase hex digits
/// (the first 16 bytes of a digest over the public keys).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did(pub String);

pub const DID_PREFIX: &str = "did:pnc:";
pub const DID_LEN: usize = DID_PREFIX.len() + 32;

impl Did {
    pub fn from_public(keys: &DidPublicKeys) -> Self {
        let d = tagged_hash("pnc/did/v1", &[&keys.sig, &keys.enc]);
        Did(format!("{DID_PREFIX}{}", hex::encode(&d[..16])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Wire for Did {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.0.clone())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        Ok(Did(String::from_wire(value)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidPublicKeys {
    pub sig: Bytes,
    pub enc: Bytes,
}

#[derive(Clone, PartialEq, Eq)]
pub struct DidSecretKeys {
    pub sig: Bytes,
    pub enc: Bytes,
}

impl fmt::Debug for DidSecretKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DidSecretKeys(..)")
    }
}

wire_record!(DidSecretKeys = tags::DID_SECRET_KEYS; { sig, enc });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidKeys {
    pub did: Did,
    pub public: DidPublicKeys,
    pub secret: DidSecretKeys,
}

/// Result of opening a sealed box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opened {
    pub plaintext: Vec<u8>,
    /// Public encryption key of the authenticated sender, if any.
    pub sender: Option<Bytes>,
}

/// Holder-only credential secret, 256 bits.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterSecret(pub [u8; 32]);

impl MasterSecret {
    pub fn random(rng: &mut Drbg) -> Self {
        MasterSecret(random_array(rng))
    }
    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }
}

impl fmt::Debug for MasterSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterSecret(..)")
    }
}

impl Wire for MasterSecret {
    fn to_wire(&self) -> WireValue {
        self.0.to_wire()
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        Ok(MasterSecret(<[u8; 32]>::from_wire(value)?))
    }
}

/// Symmetric key shared by EMSP and EV for billing authentication.
#[derive(Clone, PartialEq, Eq)]
pub struct ContractKey(pub [u8; 32]);

impl fmt::Debug for ContractKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ContractKey(..)")
    }
}

impl Wire for ContractKey {
    fn to_wire(&self) -> WireValue {
        self.0.to_wire()
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        Ok(ContractKey(<[u8; 32]>::from_wire(value)?))
    }
}

/// Opaque 16-byte contract identifier known only to the EMSP and the EV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContractId(pub [u8; 16]);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Wire for ContractId {
    fn to_wire(&self) -> WireValue {
        self.0.to_wire()
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        Ok(ContractId(<[u8; 16]>::from_wire(value)?))
    }
}

/// Integer encoding of an attribute value: SHA-256 of its UTF-8 bytes.
pub fn encode_attribute(raw: &str) -> BigUint {
    BigUint::from_bytes_be(&tagged_hash("pnc/attr/v1", &[raw.as_bytes()]))
}

/// A verifier's request for a presentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofRequest {
    pub nonce: [u8; 16],
    pub requested_reveal: BTreeSet<String>,
    pub cred_def_id: String,
    pub registry_id: String,
    pub registry_version: u64,
}

wire_record!(ProofRequest = tags::PROOF_REQUEST; {
    nonce, requested_reveal, cred_def_id, registry_id, registry_version
});

impl ProofRequest {
    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.to_bytes())
    }
}

/// Accumulator membership witness valid at `version`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub value: BigUint,
    pub version: u64,
}

wire_record!(Witness = tags::WITNESS; { value, version });

/// Read access to the disclosed part of a presentation.
pub trait PresentationView {
    fn revealed(&self) -> &BTreeMap<String, String>;
}

/// Slot of the master secret among the credential's message slots.
pub const SLOT_MASTER_SECRET: usize = 0;
/// Slot of the revocation index.
pub const SLOT_REV_INDEX: usize = 1;
/// Number of reserved slots preceding the schema attributes.
pub const RESERVED_SLOTS: usize = 2;

/// The operations every crypto backend provides.
///
/// Randomness is always passed in explicitly so that runs are reproducible
/// from a seed.
pub trait CryptoSuite: Clone + fmt::Debug + Send + Sync + 'static {
    const NAME: &'static str;

    type IssuerPublicKey: Wire + Clone + fmt::Debug + PartialEq + Send + Sync;
    type IssuerSecretKey: Wire + Clone + Send + Sync;
    type BlindedSecret: Wire + Clone + fmt::Debug + Send + Sync;
    type BlindingFactor: Wire + Clone + Send + Sync;
    type PreCredential: Wire + Clone + fmt::Debug + Send + Sync;
    type Credential: Wire + Clone + Send + Sync;
    type Presentation: Wire + Clone + fmt::Debug + Send + Sync + PresentationView;
    type AccParams: Wire + Clone + fmt::Debug + PartialEq + Send + Sync;

    fn gen_did_keys(&self, rng: &mut Drbg) -> DidKeys;
    fn sign(&self, sk: &DidSecretKeys, msg: &[u8]) -> Vec<u8>;
    fn verify(&self, pk: &DidPublicKeys, msg: &[u8], sig: &[u8]) -> bool;
    fn pk_encrypt(&self, to: &DidPublicKeys, from: Option<&DidSecretKeys>, msg: &[u8], rng: &mut Drbg) -> Vec<u8>;
    fn pk_decrypt(&self, sk: &DidSecretKeys, blob: &[u8]) -> Result<Opened, CryptoError>;
    fn hmac_tag(&self, key: &ContractKey, msg: &[u8]) -> Vec<u8>;
    fn hmac_verify(&self, key: &ContractKey, msg: &[u8], tag: &[u8]) -> bool {
        let expected = self.hmac_tag(key, msg);
        expected.len() == tag.len() && expected.iter().zip(tag).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }

    /// Issuer key with `attr_count` message slots, including the two
    /// reserved slots.
    fn issuer_keygen(
        &self,
        attr_count: usize,
        modulus_bits: u64,
        rng: &mut Drbg,
    ) -> Result<(Self::IssuerPublicKey, Self::IssuerSecretKey), CryptoError>;
    fn attr_slots(&self, pk: &Self::IssuerPublicKey) -> usize;

    /// Accumulator parameters and initial value for a new registry.
    fn accumulator_setup(&self, pk: &Self::IssuerPublicKey, rng: &mut Drbg) -> (Self::AccParams, BigUint);

    fn blind_master_secret(
        &self,
        pk: &Self::IssuerPublicKey,
        ms: &MasterSecret,
        offer_nonce: &[u8],
        rng: &mut Drbg,
    ) -> (Self::BlindedSecret, Self::BlindingFactor);
    fn verify_blinding(&self, pk: &Self::IssuerPublicKey, blinded: &Self::BlindedSecret, offer_nonce: &[u8]) -> bool;

    /// A fresh revocation index (accumulator element).
    fn new_revocation_index(&self, sk: &Self::IssuerSecretKey, rng: &mut Drbg) -> BigUint;

    /// Signs the blinded secret together with the schema attributes (in
    /// schema order, already integer-encoded) and the revocation index.
    /// The blinding proof must already have been checked.
    #[allow(clippy::too_many_arguments)]
    fn sign_credential(
        &self,
        pk: &Self::IssuerPublicKey,
        sk: &Self::IssuerSecretKey,
        blinded: &Self::BlindedSecret,
        attrs: &[BigUint],
        rev_index: &BigUint,
        rng: &mut Drbg,
    ) -> Result<Self::PreCredential, CryptoError>;

    fn complete_credential(
        &self,
        pk: &Self::IssuerPublicKey,
        pre: &Self::PreCredential,
        factor: &Self::BlindingFactor,
        ms: &MasterSecret,
        attrs: &[BigUint],
        rev_index: &BigUint,
    ) -> Result<Self::Credential, CryptoError>;

    /// Builds a presentation revealing the named attributes. `attr_names`
    /// and `attr_raw` are in schema order.
    #[allow(clippy::too_many_arguments)]
    fn create_presentation(
        &self,
        pk: &Self::IssuerPublicKey,
        cred: &Self::Credential,
        attr_names: &[String],
        attr_raw: &[String],
        req: &ProofRequest,
        witness: &Witness,
        acc: &Self::AccParams,
        acc_value: &BigUint,
        rng: &mut Drbg,
    ) -> Result<Self::Presentation, CryptoError>;

    fn verify_presentation(
        &self,
        pk: &Self::IssuerPublicKey,
        attr_names: &[String],
        pres: &Self::Presentation,
        req: &ProofRequest,
        acc: &Self::AccParams,
        acc_value: &BigUint,
    ) -> bool;

    /// New accumulator value after applying `op`. `active_after` is the
    /// member set once `op` is applied. Removal needs the issuer trapdoor.
    fn accumulate(
        &self,
        acc: &Self::AccParams,
        sk: Option<&Self::IssuerSecretKey>,
        value: &BigUint,
        op: &DeltaOp,
        active_after: &BTreeSet<BigUint>,
    ) -> Result<BigUint, CryptoError>;

    /// Witness handed out for a freshly added element.
    fn initial_witness(&self, before: &BigUint, after: &BigUint) -> BigUint;

    /// Applies delta entries to a witness, ending at `new_value`.
    fn witness_update(
        &self,
        acc: &Self::AccParams,
        own: &BigUint,
        witness: &Witness,
        deltas: &[DeltaEntry],
        new_value: &BigUint,
    ) -> Result<Witness, CryptoError>;

    fn witness_valid(&self, acc: &Self::AccParams, own: &BigUint, witness: &BigUint, value: &BigUint) -> bool;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drbg_labels_are_independent() {
        let mut a = drbg(1, "a");
        let mut b = drbg(1, "b");
        assert_ne!(a.next_u64(), b.next_u64());
        assert_eq!(drbg(1, "a").next_u64(), drbg(1, "a").next_u64());
    }

    #[test]
    fn tagged_hash_is_length_prefixed() {
        assert_ne!(tagged_hash("d", &[b"ab", b"c"]), tagged_hash("d", &[b"a", b"bc"]));
    }

    #[test]
    fn did_shape() {
        let keys = DidPublicKeys { sig: Bytes(vec![1; 32]), enc: Bytes(vec![2; 32]) };
        let did = Did::from_public(&keys);
        assert_eq!(did.as_str().len(), DID_LEN);
        assert!(did.as_str().starts_with(DID_PREFIX));
    }
}
