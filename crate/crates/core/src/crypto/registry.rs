use std::collections::BTreeSet;

use num_bigint::BigUint;

use super::{tagged_hash, CryptoError, CryptoSuite, Drbg, Witness, RESERVED_SLOTS};
use crate::codec::{tags, CodecError, RecordReader, Wire, WireValue};
use crate::wire_record;

/// A single accumulator change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeltaOp {
    Add(BigUint),
    Remove(BigUint),
}

impl DeltaOp {
    pub fn element(&self) -> &BigUint {
        match self {
            DeltaOp::Add(e) | DeltaOp::Remove(e) => e,
        }
    }
}

/// Delta log entry: the change that produced `version` and the resulting
/// accumulator value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaEntry {
    pub version: u64,
    pub op: DeltaOp,
    pub value: BigUint,
}

impl Wire for DeltaEntry {
    fn to_wire(&self) -> WireValue {
        let (kind, e) = match &self.op {
            DeltaOp::Add(e) => (0u8, e),
            DeltaOp::Remove(e) => (1u8, e),
        };
        WireValue::Record {
            tag: tags::DELTA_ENTRY,
            fields: vec![self.version.to_wire(), kind.to_wire(), e.to_wire(), self.value.to_wire()],
        }
    }

    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        let mut r = RecordReader::new(value, tags::DELTA_ENTRY, 4)?;
        let version = r.field()?;
        let kind: u8 = r.field()?;
        let e = r.field()?;
        let op = match kind {
            0 => DeltaOp::Add(e),
            1 => DeltaOp::Remove(e),
            _ => return Err(CodecError::Malformed("unknown delta kind")),
        };
        Ok(DeltaEntry { version, op, value: r.field()? })
    }
}

impl crate::codec::Record for DeltaEntry {
    const TAG: u16 = tags::DELTA_ENTRY;
    const FIELDS: &'static [&'static str] = &["version", "kind", "element", "value"];
}

/// Revocation registry: accumulator parameters, the value at every version
/// and the delta log. Version 0 is the empty accumulator.
#[derive(Debug, Clone)]
pub struct RevocationRegistry<S: CryptoSuite> {
    pub id: String,
    pub cred_def_id: String,
    pub params: S::AccParams,
    pub values: Vec<BigUint>,
    pub deltas: Vec<DeltaEntry>,
}

wire_record!(impl[S: CryptoSuite] RevocationRegistry<S> = tags::REV_REGISTRY; {
    id, cred_def_id, params, values, deltas
});

impl<S: CryptoSuite> PartialEq for RevocationRegistry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl<S: CryptoSuite> RevocationRegistry<S> {
    pub fn new(cred_def_id: &str, params: S::AccParams, initial: BigUint) -> Self {
        let digest =
            tagged_hash("pnc/registry-id/v1", &[cred_def_id.as_bytes(), &params.to_bytes(), &initial.to_bytes()]);
        Self {
            id: format!("revreg:{}", hex::encode(&digest[..16])),
            cred_def_id: cred_def_id.to_string(),
            params,
            values: vec![initial],
            deltas: Vec::new(),
        }
    }

    /// The id this registry's genesis content commits to.
    pub fn expected_id(&self) -> String {
        Self::new(&self.cred_def_id, self.params.clone(), self.values[0].clone()).id
    }

    pub fn version(&self) -> u64 {
        self.deltas.len() as u64
    }

    pub fn value(&self) -> &BigUint {
        self.values.last().expect("registry always has a genesis value")
    }

    pub fn value_at(&self, version: u64) -> Option<&BigUint> {
        self.values.get(usize::try_from(version).ok()?)
    }

    /// Delta entries that produced versions after `from`.
    pub fn deltas_since(&self, from: u64) -> &[DeltaEntry] {
        let start = usize::try_from(from).unwrap_or(usize::MAX).min(self.deltas.len());
        &self.deltas[start..]
    }

    pub fn active(&self) -> BTreeSet<BigUint> {
        active_after(&self.deltas)
    }

    /// Applies one change, producing the next version.
    pub fn apply(&self, suite: &S, sk: Option<&S::IssuerSecretKey>, op: DeltaOp) -> Result<Self, CryptoError> {
        let mut active = self.active();
        match &op {
            DeltaOp::Add(e) => {
                if !active.insert(e.clone()) {
                    return Err(CryptoError::DuplicateElement);
                }
            }
            DeltaOp::Remove(e) => {
                if !active.remove(e) {
                    return Err(CryptoError::UnknownElement);
                }
            }
        }
        let value = suite.accumulate(&self.params, sk, self.value(), &op, &active)?;
        let mut next = self.clone();
        next.deltas.push(DeltaEntry { version: self.version() + 1, op, value: value.clone() });
        next.values.push(value);
        Ok(next)
    }

    pub fn add(&self, suite: &S, e: &BigUint) -> Result<Self, CryptoError> {
        self.apply(suite, None, DeltaOp::Add(e.clone()))
    }

    pub fn revoke(&self, suite: &S, sk: &S::IssuerSecretKey, e: &BigUint) -> Result<Self, CryptoError> {
        self.apply(suite, Some(sk), DeltaOp::Remove(e.clone()))
    }

    /// Structural consistency: values and deltas line up version by version.
    pub fn is_well_formed(&self) -> bool {
        self.values.len() == self.deltas.len() + 1
            && self.deltas.iter().enumerate().all(|(i, d)| d.version == i as u64 + 1 && d.value == self.values[i + 1])
    }
}

fn active_after(deltas: &[DeltaEntry]) -> BTreeSet<BigUint> {
    let mut active = BTreeSet::new();
    for d in deltas {
        match &d.op {
            DeltaOp::Add(e) => {
                active.insert(e.clone());
            }
            DeltaOp::Remove(e) => {
                active.remove(e);
            }
        }
    }
    active
}

/// Everything the issuer produces for one credential.
#[derive(Debug, Clone)]
pub struct Issuance<S: CryptoSuite> {
    pub pre_credential: S::PreCredential,
    pub rev_index: BigUint,
    pub registry: RevocationRegistry<S>,
    pub witness: Witness,
}

/// Checks the blinding proof, picks a fresh revocation index, adds it to the
/// registry and signs.
#[allow(clippy::too_many_arguments)]
pub fn issue_credential<S: CryptoSuite>(
    suite: &S,
    pk: &S::IssuerPublicKey,
    sk: &S::IssuerSecretKey,
    blinded: &S::BlindedSecret,
    offer_nonce: &[u8],
    attrs: &[BigUint],
    registry: &RevocationRegistry<S>,
    rng: &mut Drbg,
) -> Result<Issuance<S>, CryptoError> {
    if !suite.verify_blinding(pk, blinded, offer_nonce) {
        return Err(CryptoError::InvalidBlinding);
    }
    if attrs.len() + RESERVED_SLOTS != suite.attr_slots(pk) {
        return Err(CryptoError::SchemaMismatch);
    }
    let active = registry.active();
    let rev_index = loop {
        let e = suite.new_revocation_index(sk, rng);
        if !active.contains(&e) {
            break e;
        }
    };
    let next = registry.add(suite, &rev_index)?;
    let pre_credential = suite.sign_credential(pk, sk, blinded, attrs, &rev_index, rng)?;
    let witness = Witness { value: suite.initial_witness(registry.value(), next.value()), version: next.version() };
    Ok(Issuance { pre_credential, rev_index, registry: next, witness })
}
