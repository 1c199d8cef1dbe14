//! In-memory verifiable data registry.
//!
//! Writes go through one lock and are totally ordered; each accepted write
//! is appended to a log together with the caller and the role that
//! authorized it. Reads return immutable snapshots and never block on other
//! readers. Replaying the log over the genesis records reproduces the state
//! byte for byte.

mod types;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::codec::{decode, CodecError, Wire};
use crate::crypto::{CryptoSuite, DeltaEntry, DeltaOp, Did, RevocationRegistry};

pub use types::{
    CredentialDefinition, CredentialSchema, DidRecord, LedgerEntry, LedgerOp, LedgerState, Role, EMSP_ID_ATTR,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("{caller} may not {action}")]
    PermissionDenied { caller: String, action: &'static str },
    #[error("DID {0} already exists")]
    DuplicateDid(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("dangling reference to {0}")]
    DanglingReference(String),
    #[error("registry is at version {current}, update was based on {base}")]
    VersionConflict { base: u64, current: u64 },
    #[error("invalid object: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// A value read from the ledger together with the global version it was
/// read at.
#[derive(Debug, Clone, PartialEq)]
pub struct Versioned<T> {
    pub value: T,
    pub version: u64,
}

struct Inner<S: CryptoSuite> {
    state: Arc<LedgerState<S>>,
    log: Vec<LedgerEntry<S>>,
}

pub struct Ledger<S: CryptoSuite> {
    genesis: Vec<DidRecord>,
    inner: Mutex<Inner<S>>,
}

impl<S: CryptoSuite> std::fmt::Debug for Ledger<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger").field("version", &self.snapshot().version).finish()
    }
}

impl<S: CryptoSuite> Ledger<S> {
    /// A ledger whose only records are the given stewards.
    pub fn genesis(stewards: Vec<DidRecord>) -> Result<Self, LedgerError> {
        let state = genesis_state(&stewards)?;
        Ok(Self { genesis: stewards, inner: Mutex::new(Inner { state: Arc::new(state), log: Vec::new() }) })
    }

    pub fn snapshot(&self) -> Arc<LedgerState<S>> {
        Arc::clone(&self.lock().state)
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version
    }

    pub fn genesis_records(&self) -> &[DidRecord] {
        &self.genesis
    }

    pub fn log(&self) -> Vec<LedgerEntry<S>> {
        self.lock().log.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner<S>> {
        self.inner.lock().expect("ledger lock poisoned")
    }

    /// Validates `op` against the current state, applies it and logs it.
    /// Idempotent publications of identical content return the current
    /// version without a new entry.
    pub fn submit(&self, caller: &Did, op: LedgerOp<S>) -> Result<u64, LedgerError> {
        let mut inner = self.lock();
        let mut next = (*inner.state).clone();
        let role = caller_role(&next, caller)?;
        if !apply(&mut next, caller, role, &op)? {
            return Ok(next.version);
        }
        next.version += 1;
        let version = next.version;
        inner.log.push(LedgerEntry { version, caller: caller.clone(), caller_role: role, op });
        inner.state = Arc::new(next);
        Ok(version)
    }

    pub fn write_did(&self, caller: &Did, record: DidRecord) -> Result<u64, LedgerError> {
        self.submit(caller, LedgerOp::WriteDid(record))
    }

    pub fn publish_schema(&self, caller: &Did, schema: CredentialSchema) -> Result<String, LedgerError> {
        let id = schema.id.clone();
        self.submit(caller, LedgerOp::PublishSchema(schema))?;
        Ok(id)
    }

    pub fn publish_cred_def(&self, caller: &Did, def: CredentialDefinition<S>) -> Result<String, LedgerError> {
        let id = def.id.clone();
        self.submit(caller, LedgerOp::PublishCredDef(def))?;
        Ok(id)
    }

    pub fn publish_registry(&self, caller: &Did, registry: RevocationRegistry<S>) -> Result<String, LedgerError> {
        let id = registry.id.clone();
        self.submit(caller, LedgerOp::PublishRegistry(registry))?;
        Ok(id)
    }

    /// Appends one accumulator change computed by the issuer against
    /// `base_version` of the registry.
    pub fn update_accumulator(
        &self,
        caller: &Did,
        registry_id: &str,
        base_version: u64,
        delta: DeltaEntry,
    ) -> Result<u64, LedgerError> {
        self.submit(caller, LedgerOp::UpdateAccumulator { registry_id: registry_id.into(), base_version, delta })
    }

    pub fn get_did(&self, did: &Did) -> Result<Versioned<DidRecord>, LedgerError> {
        let s = self.snapshot();
        let value = s.did_records.get(did).cloned().ok_or_else(|| LedgerError::NotFound(did.to_string()))?;
        Ok(Versioned { value, version: s.version })
    }

    pub fn get_schema(&self, id: &str) -> Result<Versioned<CredentialSchema>, LedgerError> {
        let s = self.snapshot();
        let value = s.schemas.get(id).cloned().ok_or_else(|| LedgerError::NotFound(id.into()))?;
        Ok(Versioned { value, version: s.version })
    }

    pub fn get_cred_def(&self, id: &str) -> Result<Versioned<CredentialDefinition<S>>, LedgerError> {
        let s = self.snapshot();
        let value = s.cred_defs.get(id).cloned().ok_or_else(|| LedgerError::NotFound(id.into()))?;
        Ok(Versioned { value, version: s.version })
    }

    pub fn get_registry(&self, id: &str) -> Result<Versioned<RevocationRegistry<S>>, LedgerError> {
        let s = self.snapshot();
        let value = s.registries.get(id).cloned().ok_or_else(|| LedgerError::NotFound(id.into()))?;
        Ok(Versioned { value, version: s.version })
    }

    /// Delta entries that produced registry versions after `from_version`.
    pub fn get_registry_delta(&self, id: &str, from_version: u64) -> Result<Vec<DeltaEntry>, LedgerError> {
        let s = self.snapshot();
        let reg = s.registries.get(id).ok_or_else(|| LedgerError::NotFound(id.into()))?;
        Ok(reg.deltas_since(from_version).to_vec())
    }

    /// Credential definitions issued under an EMSP id.
    pub fn cred_defs_for_emsp(&self, emsp_id: &str) -> Vec<CredentialDefinition<S>> {
        self.snapshot().cred_defs.values().filter(|d| d.emsp_id == emsp_id).cloned().collect()
    }

    /// Id of the registry attached to a credential definition.
    pub fn registry_for_cred_def(&self, cred_def_id: &str) -> Option<String> {
        self.snapshot().registries.values().find(|r| r.cred_def_id == cred_def_id).map(|r| r.id.clone())
    }

    /// Newline-delimited hex: genesis records first, then every log entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.genesis {
            out.push_str(&hex::encode(r.to_bytes()));
            out.push('\n');
        }
        for e in self.log() {
            out.push_str(&hex::encode(e.to_bytes()));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a ledger from [`Ledger::dump`] output.
    pub fn from_dump(text: &str) -> Result<Self, LedgerError> {
        let mut genesis = Vec::new();
        let mut log = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let bytes = hex::decode(line).map_err(|_| LedgerError::Invalid("dump line is not hex"))?;
            let value = decode(&bytes)?;
            match value {
                crate::codec::WireValue::Record { tag, .. } if tag == crate::codec::tags::DID_RECORD => {
                    if !log.is_empty() {
                        return Err(LedgerError::Invalid("genesis record after log entries"));
                    }
                    genesis.push(DidRecord::from_wire(&value)?);
                }
                _ => log.push(LedgerEntry::<S>::from_wire(&value)?),
            }
        }
        let state = replay(&genesis, &log)?;
        Ok(Self { genesis, inner: Mutex::new(Inner { state: Arc::new(state), log }) })
    }
}

/// Parses a genesis file: one hex-encoded steward record per line.
pub fn parse_genesis(text: &str) -> Result<Vec<DidRecord>, LedgerError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let bytes = hex::decode(l).map_err(|_| LedgerError::Invalid("genesis line is not hex"))?;
            Ok(DidRecord::from_bytes(&bytes)?)
        })
        .collect()
}

pub fn render_genesis(stewards: &[DidRecord]) -> String {
    stewards.iter().map(|r| hex::encode(r.to_bytes()) + "\n").collect()
}

fn genesis_state<S: CryptoSuite>(stewards: &[DidRecord]) -> Result<LedgerState<S>, LedgerError> {
    let mut state = LedgerState::default();
    for r in stewards {
        if r.role != Role::Steward {
            return Err(LedgerError::Invalid("genesis records must be stewards"));
        }
        if !r.is_self_certifying() {
            return Err(LedgerError::Invalid("DID does not match its keys"));
        }
        if state.did_records.insert(r.did.clone(), r.clone()).is_some() {
            return Err(LedgerError::DuplicateDid(r.did.to_string()));
        }
        state.permissions.insert(r.did.clone(), Role::Steward);
    }
    Ok(state)
}

/// Recomputes the state from genesis and a write log, re-checking every
/// permission along the way.
pub fn replay<S: CryptoSuite>(genesis: &[DidRecord], log: &[LedgerEntry<S>]) -> Result<LedgerState<S>, LedgerError> {
    let mut state = genesis_state(genesis)?;
    for entry in log {
        let role = caller_role(&state, &entry.caller)?;
        if role != entry.caller_role {
            return Err(LedgerError::Invalid("logged role does not match replayed role"));
        }
        if !apply(&mut state, &entry.caller, role, &entry.op)? {
            return Err(LedgerError::Invalid("logged entry has no effect"));
        }
        state.version += 1;
        if state.version != entry.version {
            return Err(LedgerError::Invalid("log versions are not contiguous"));
        }
    }
    Ok(state)
}

fn caller_role<S: CryptoSuite>(state: &LedgerState<S>, caller: &Did) -> Result<Role, LedgerError> {
    state.permissions.get(caller).copied().ok_or_else(|| LedgerError::PermissionDenied {
        caller: caller.to_string(),
        action: "write without a ledger identity",
    })
}

fn denied(caller: &Did, action: &'static str) -> LedgerError {
    LedgerError::PermissionDenied { caller: caller.to_string(), action }
}

/// Applies `op` in place. Returns `false` for an idempotent no-op.
fn apply<S: CryptoSuite>(
    state: &mut LedgerState<S>,
    caller: &Did,
    role: Role,
    op: &LedgerOp<S>,
) -> Result<bool, LedgerError> {
    match op {
        LedgerOp::WriteDid(record) => {
            if !record.is_self_certifying() {
                return Err(LedgerError::Invalid("DID does not match its keys"));
            }
            match state.did_records.get(&record.did) {
                Some(existing) if caller == &record.did => {
                    if existing.role != record.role {
                        return Err(denied(caller, "change its own role"));
                    }
                }
                Some(_) if role == Role::Steward => return Err(LedgerError::DuplicateDid(record.did.to_string())),
                Some(_) => return Err(denied(caller, "overwrite another DID")),
                None if role != Role::Steward => return Err(denied(caller, "create DIDs")),
                None => {}
            }
            state.did_records.insert(record.did.clone(), record.clone());
            state.permissions.insert(record.did.clone(), record.role);
        }
        LedgerOp::PublishSchema(schema) => {
            if role != Role::Verinym {
                return Err(denied(caller, "publish schemas"));
            }
            if schema.id != schema.expected_id() {
                return Err(LedgerError::Invalid("schema id is not its content digest"));
            }
            if !schema.attr_names.iter().any(|a| a == EMSP_ID_ATTR) {
                return Err(LedgerError::Invalid("schema lacks the emsp_id attribute"));
            }
            if state.schemas.contains_key(&schema.id) {
                return Ok(false);
            }
            state.schemas.insert(schema.id.clone(), schema.clone());
        }
        LedgerOp::PublishCredDef(def) => {
            if role != Role::Verinym || &def.issuer != caller {
                return Err(denied(caller, "publish credential definitions"));
            }
            if def.id != def.expected_id() {
                return Err(LedgerError::Invalid("credential definition id is not its content digest"));
            }
            if !state.schemas.contains_key(&def.schema_id) {
                return Err(LedgerError::DanglingReference(def.schema_id.clone()));
            }
            if state.cred_defs.contains_key(&def.id) {
                return Ok(false);
            }
            state.cred_defs.insert(def.id.clone(), def.clone());
        }
        LedgerOp::PublishRegistry(reg) => {
            let def = state
                .cred_defs
                .get(&reg.cred_def_id)
                .ok_or_else(|| LedgerError::DanglingReference(reg.cred_def_id.clone()))?;
            if role != Role::Verinym || &def.issuer != caller {
                return Err(denied(caller, "publish this revocation registry"));
            }
            if reg.id != reg.expected_id() || !reg.deltas.is_empty() || reg.values.len() != 1 {
                return Err(LedgerError::Invalid("registry must be fresh and content-addressed"));
            }
            if state.registries.contains_key(&reg.id) {
                return Ok(false);
            }
            state.registries.insert(reg.id.clone(), reg.clone());
        }
        LedgerOp::UpdateAccumulator { registry_id, base_version, delta } => {
            let reg = state.registries.get(registry_id).ok_or_else(|| LedgerError::NotFound(registry_id.clone()))?;
            let issuer = state.cred_defs.get(&reg.cred_def_id).map(|d| &d.issuer);
            if issuer != Some(caller) {
                return Err(denied(caller, "update a foreign registry"));
            }
            if *base_version != reg.version() {
                return Err(LedgerError::VersionConflict { base: *base_version, current: reg.version() });
            }
            if delta.version != base_version + 1 {
                return Err(LedgerError::Invalid("delta version must follow the base version"));
            }
            let active = reg.active();
            let consistent = match &delta.op {
                DeltaOp::Add(e) => !active.contains(e),
                DeltaOp::Remove(e) => active.contains(e),
            };
            if !consistent {
                return Err(LedgerError::Invalid("delta inconsistent with the active set"));
            }
            let mut next = reg.clone();
            next.deltas.push(delta.clone());
            next.values.push(delta.value.clone());
            state.registries.insert(registry_id.clone(), next);
        }
    }
    Ok(true)
}

/// Counts of each object kind, for summaries.
pub fn object_counts<S: CryptoSuite>(state: &LedgerState<S>) -> BTreeMap<&'static str, usize> {
    let verinyms = state.did_records.values().filter(|r| r.role == Role::Verinym).count();
    BTreeMap::from([
        ("did", state.did_records.len()),
        ("verinym", verinyms),
        ("schema", state.schemas.len()),
        ("cred_def", state.cred_defs.len()),
        ("registry", state.registries.len()),
    ])
}
