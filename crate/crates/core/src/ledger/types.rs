use std::collections::BTreeMap;
use std::fmt;

use crate::codec::{tags, Bytes, CodecError, RecordReader, Wire, WireValue};
use crate::crypto::{tagged_hash, CryptoSuite, DeltaEntry, Did, DidPublicKeys, RevocationRegistry};
use crate::wire_record;

/// Attribute every contract credential schema must carry.
pub const EMSP_ID_ATTR: &str = "emsp_id";

/// Write permission level of a DID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// First-level writer: onboards verinyms and provisioning DIDs.
    Steward,
    /// Second-level writer: may publish schemas, credential definitions and
    /// revocation registries.
    Verinym,
    /// Read-only identity, such as a provisioning DID.
    Client,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Steward => "steward",
            Role::Verinym => "verinym",
            Role::Client => "client",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "steward" => Ok(Role::Steward),
            "verinym" => Ok(Role::Verinym),
            "client" => Ok(Role::Client),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

impl Wire for Role {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.as_str().into())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        String::from_wire(value)?.parse().map_err(|_| CodecError::Malformed("unknown role"))
    }
}

/// Public part of a DID: its keys and permission level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidRecord {
    pub did: Did,
    pub sig_pk: Bytes,
    pub enc_pk: Bytes,
    pub role: Role,
}

wire_record!(DidRecord = tags::DID_RECORD; { did, sig_pk, enc_pk, role });

impl DidRecord {
    pub fn new(did: Did, keys: &DidPublicKeys, role: Role) -> Self {
        Self { did, sig_pk: keys.sig.clone(), enc_pk: keys.enc.clone(), role }
    }

    pub fn public_keys(&self) -> DidPublicKeys {
        DidPublicKeys { sig: self.sig_pk.clone(), enc: self.enc_pk.clone() }
    }

    /// The DID is derived from the keys it lists.
    pub fn is_self_certifying(&self) -> bool {
        Did::from_public(&self.public_keys()) == self.did
    }
}

fn content_id(prefix: &str, domain: &str, parts: &[&[u8]]) -> String {
    format!("{prefix}:{}", hex::encode(&tagged_hash(domain, parts)[..16]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialSchema {
    pub id: String,
    pub name: String,
    pub version: String,
    pub attr_names: Vec<String>,
}

wire_record!(CredentialSchema = tags::CREDENTIAL_SCHEMA; { id, name, version, attr_names });

impl CredentialSchema {
    pub fn new(name: &str, version: &str, attr_names: &[&str]) -> Self {
        let attr_names: Vec<String> = attr_names.iter().map(|s| s.to_string()).collect();
        let id = Self::derive_id(name, version, &attr_names);
        Self { id, name: name.into(), version: version.into(), attr_names }
    }

    fn derive_id(name: &str, version: &str, attrs: &[String]) -> String {
        content_id("schema", "pnc/schema-id/v1", &[name.as_bytes(), version.as_bytes(), &attrs.to_vec().to_bytes()])
    }

    pub fn expected_id(&self) -> String {
        Self::derive_id(&self.name, &self.version, &self.attr_names)
    }

    /// The shared contract schema baseline.
    pub fn contract_baseline() -> Self {
        Self::new("contract-credential", "1.0", &[EMSP_ID_ATTR, "contract_ref", "tariff", "valid_until"])
    }
}

/// Issuer public key bound to a schema, an issuer DID and an EMSP id.
#[derive(Debug, Clone)]
pub struct CredentialDefinition<S: CryptoSuite> {
    pub id: String,
    pub schema_id: String,
    pub issuer: Did,
    pub emsp_id: String,
    pub public_key: S::IssuerPublicKey,
}

wire_record!(impl[S: CryptoSuite] CredentialDefinition<S> = tags::CRED_DEF; {
    id, schema_id, issuer, emsp_id, public_key
});

impl<S: CryptoSuite> PartialEq for CredentialDefinition<S> {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl<S: CryptoSuite> CredentialDefinition<S> {
    pub fn new(schema_id: &str, issuer: Did, emsp_id: &str, public_key: S::IssuerPublicKey) -> Self {
        let id = Self::derive_id(schema_id, &issuer, emsp_id, &public_key);
        Self { id, schema_id: schema_id.into(), issuer, emsp_id: emsp_id.into(), public_key }
    }

    fn derive_id(schema_id: &str, issuer: &Did, emsp_id: &str, pk: &S::IssuerPublicKey) -> String {
        content_id(
            "creddef",
            "pnc/cred-def-id/v1",
            &[schema_id.as_bytes(), issuer.as_str().as_bytes(), emsp_id.as_bytes(), &pk.to_bytes()],
        )
    }

    pub fn expected_id(&self) -> String {
        Self::derive_id(&self.schema_id, &self.issuer, &self.emsp_id, &self.public_key)
    }
}

/// Complete registry contents at one global version.
#[derive(Debug, Clone)]
pub struct LedgerState<S: CryptoSuite> {
    pub version: u64,
    pub did_records: BTreeMap<Did, DidRecord>,
    pub permissions: BTreeMap<Did, Role>,
    pub schemas: BTreeMap<String, CredentialSchema>,
    pub cred_defs: BTreeMap<String, CredentialDefinition<S>>,
    pub registries: BTreeMap<String, RevocationRegistry<S>>,
}

wire_record!(impl[S: CryptoSuite] LedgerState<S> = tags::LEDGER_STATE; {
    version, did_records, permissions, schemas, cred_defs, registries
});

impl<S: CryptoSuite> Default for LedgerState<S> {
    fn default() -> Self {
        Self {
            version: 0,
            did_records: BTreeMap::new(),
            permissions: BTreeMap::new(),
            schemas: BTreeMap::new(),
            cred_defs: BTreeMap::new(),
            registries: BTreeMap::new(),
        }
    }
}

impl<S: CryptoSuite> PartialEq for LedgerState<S> {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

/// A state-changing operation.
#[derive(Debug, Clone)]
pub enum LedgerOp<S: CryptoSuite> {
    WriteDid(DidRecord),
    PublishSchema(CredentialSchema),
    PublishCredDef(CredentialDefinition<S>),
    PublishRegistry(RevocationRegistry<S>),
    UpdateAccumulator { registry_id: String, base_version: u64, delta: DeltaEntry },
}

impl<S: CryptoSuite> LedgerOp<S> {
    pub fn name(&self) -> &'static str {
        match self {
            LedgerOp::WriteDid(_) => "write_did",
            LedgerOp::PublishSchema(_) => "publish_schema",
            LedgerOp::PublishCredDef(_) => "publish_cred_def",
            LedgerOp::PublishRegistry(_) => "publish_registry",
            LedgerOp::UpdateAccumulator { .. } => "update_accumulator",
        }
    }
}

impl<S: CryptoSuite> Wire for LedgerOp<S> {
    fn to_wire(&self) -> WireValue {
        let (tag, fields) = match self {
            LedgerOp::WriteDid(r) => (tags::OP_WRITE_DID, vec![r.to_wire()]),
            LedgerOp::PublishSchema(s) => (tags::OP_SCHEMA, vec![s.to_wire()]),
            LedgerOp::PublishCredDef(c) => (tags::OP_CRED_DEF, vec![c.to_wire()]),
            LedgerOp::PublishRegistry(r) => (tags::OP_REGISTRY, vec![r.to_wire()]),
            LedgerOp::UpdateAccumulator { registry_id, base_version, delta } => {
                (tags::OP_ACC_UPDATE, vec![registry_id.to_wire(), base_version.to_wire(), delta.to_wire()])
            }
        };
        WireValue::Record { tag, fields }
    }

    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        let WireValue::Record { tag, .. } = value else {
            return Err(CodecError::Malformed("ledger operation must be a record"));
        };
        Ok(match *tag {
            tags::OP_WRITE_DID => LedgerOp::WriteDid(RecordReader::new(value, *tag, 1)?.field()?),
            tags::OP_SCHEMA => LedgerOp::PublishSchema(RecordReader::new(value, *tag, 1)?.field()?),
            tags::OP_CRED_DEF => LedgerOp::PublishCredDef(RecordReader::new(value, *tag, 1)?.field()?),
            tags::OP_REGISTRY => LedgerOp::PublishRegistry(RecordReader::new(value, *tag, 1)?.field()?),
            tags::OP_ACC_UPDATE => {
                let mut r = RecordReader::new(value, *tag, 3)?;
                LedgerOp::UpdateAccumulator { registry_id: r.field()?, base_version: r.field()?, delta: r.field()? }
            }
            other => return Err(CodecError::UnknownTag(other)),
        })
    }
}

/// One accepted write, with the caller and the role that authorized it.
#[derive(Debug, Clone)]
pub struct LedgerEntry<S: CryptoSuite> {
    pub version: u64,
    pub caller: Did,
    pub caller_role: Role,
    pub op: LedgerOp<S>,
}

wire_record!(impl[S: CryptoSuite] LedgerEntry<S> = tags::LEDGER_ENTRY; { version, caller, caller_role, op });
