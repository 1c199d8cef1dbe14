//! Protocol roles as message-driven state machines.
//!
//! Each actor owns its keys, its random generator and its per-flow state,
//! and reacts to one envelope at a time through a [`Ctx`] that gives access
//! to the crypto suite, the ledger, the logical clock and an outbox. Flow
//! starts are plain method calls made by the harness.

mod cp;
mod cpo;
mod emsp;
mod ev;
pub mod messages;
mod steward;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{tags, Bytes, CodecError, Envelope, Wire, WireValue};
use crate::crypto::{CryptoError, CryptoSuite, Did};
use crate::ledger::{Ledger, LedgerError};
use crate::wire_record;

pub use cp::{Cp, CpSession, SessionStatus};
pub use cpo::Cpo;
pub use emsp::{BillingRecord, ContractRecord, ContractStatus, Emsp, IssuerMaterial};
pub use ev::{ContractCredential, EvWallet, Fixture};
pub use messages::AuthMode;
pub use steward::Steward;

/// Network address of an actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    Steward,
    Emsp(u16),
    Ev(u16),
    Cp(u16),
    Cpo(u16),
    Adversary,
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Steward => f.write_str("steward"),
            Addr::Emsp(i) => write!(f, "emsp{i}"),
            Addr::Ev(i) => write!(f, "ev{i}"),
            Addr::Cp(i) => write!(f, "cp{i}"),
            Addr::Cpo(i) => write!(f, "cpo{i}"),
            Addr::Adversary => f.write_str("adversary"),
        }
    }
}

impl FromStr for Addr {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "steward" => return Ok(Addr::Steward),
            "adversary" => return Ok(Addr::Adversary),
            _ => {}
        }
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(|| format!("bad address {s:?}"))?;
        let (kind, num) = s.split_at(split);
        let i: u16 = num.parse().map_err(|_| format!("bad address {s:?}"))?;
        match kind {
            "emsp" => Ok(Addr::Emsp(i)),
            "ev" => Ok(Addr::Ev(i)),
            "cp" => Ok(Addr::Cp(i)),
            "cpo" => Ok(Addr::Cpo(i)),
            _ => Err(format!("bad address {s:?}")),
        }
    }
}

impl Wire for Addr {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.to_string())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        String::from_wire(value)?.parse().map_err(|_| CodecError::Malformed("bad address"))
    }
}

/// Protocol steps tracked for agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    StewardVerinym,
    ProvDid,
    CredInstall,
    ChargeAuth,
    Billing,
}

impl Label {
    pub const ALL: [Label; 5] =
        [Label::StewardVerinym, Label::ProvDid, Label::CredInstall, Label::ChargeAuth, Label::Billing];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::StewardVerinym => "StewardVerinym",
            Label::ProvDid => "ProvDid",
            Label::CredInstall => "CredInstall",
            Label::ChargeAuth => "ChargeAuth",
            Label::Billing => "Billing",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Label::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown label {s:?}"))
    }
}

impl Wire for Label {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.as_str().into())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        String::from_wire(value)?.parse().map_err(|_| CodecError::Malformed("unknown label"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceKind {
    Running,
    Commit,
    Reveal,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Running => "Running",
            TraceKind::Commit => "Commit",
            TraceKind::Reveal => "Reveal",
        }
    }
}

impl Wire for TraceKind {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.as_str().into())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match String::from_wire(value)?.as_str() {
            "Running" => Ok(TraceKind::Running),
            "Commit" => Ok(TraceKind::Commit),
            "Reveal" => Ok(TraceKind::Reveal),
            _ => Err(CodecError::Malformed("unknown trace kind")),
        }
    }
}

/// One protocol event. `Reveal` events carry no label semantics; their
/// `actor` is the party whose long-term keys were leaked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub time: u64,
    pub kind: TraceKind,
    pub actor: String,
    pub peer: String,
    pub label: Label,
    pub ds: Bytes,
}

wire_record!(TraceEvent = tags::TRACE_EVENT; { seq, time, kind, actor, peer, label, ds });

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActorError {
    #[error("channel authentication failed")]
    AuthFailed,
    #[error("proof of possession failed")]
    PopFailed,
    #[error("bad signature")]
    BadSignature,
    #[error("nonce mismatch")]
    NonceMismatch,
    #[error("replayed message")]
    Replayed,
    #[error("decryption failed")]
    DecryptFailed,
    #[error("unknown DID {0}")]
    UnknownDid(String),
    #[error("no contract for this provisioning DID")]
    NoContract,
    #[error("invalid blinded secret proof")]
    InvalidBlinding,
    #[error("credential signature invalid")]
    InvalidSignature,
    #[error("no common identification mode")]
    NoCommonMode,
    #[error("{0} is not implemented")]
    NotImplemented(&'static str),
    #[error("proof invalid")]
    ProofInvalid,
    #[error("credential revoked")]
    RevokedCredential,
    #[error("stale registry version")]
    StaleRegistryVersion,
    #[error("no credential for {0}")]
    NoCredential(String),
    #[error("unknown EMSP {0}")]
    UnknownEmsp(String),
    #[error("contract authentication expired")]
    Expired,
    #[error("contract authentication tag mismatch")]
    BadTag,
    #[error("unknown contract")]
    UnknownContract,
    #[error("{actor} does not accept {message} in state {state}")]
    UnexpectedMessage { actor: String, message: &'static str, state: &'static str },
    #[error("{0}")]
    Rejected(String),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("crypto: {0}")]
    Crypto(CryptoError),
    #[error("codec: {0}")]
    Codec(#[from] CodecError),
}

impl From<CryptoError> for ActorError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::DecryptFailed => ActorError::DecryptFailed,
            CryptoError::InvalidBlinding => ActorError::InvalidBlinding,
            CryptoError::InvalidSignature => ActorError::InvalidSignature,
            CryptoError::Revoked => ActorError::RevokedCredential,
            CryptoError::StaleWitness { .. } => ActorError::StaleRegistryVersion,
            CryptoError::BadTag => ActorError::BadTag,
            CryptoError::Expired => ActorError::Expired,
            CryptoError::Replayed => ActorError::Replayed,
            CryptoError::UnknownContract => ActorError::UnknownContract,
            CryptoError::Codec(c) => ActorError::Codec(c),
            other => ActorError::Crypto(other),
        }
    }
}

impl ActorError {
    /// Variant name, used in traces and scenario assertions.
    pub fn name(&self) -> &'static str {
        match self {
            ActorError::AuthFailed => "AuthFailed",
            ActorError::PopFailed => "PopFailed",
            ActorError::BadSignature => "BadSignature",
            ActorError::NonceMismatch => "NonceMismatch",
            ActorError::Replayed => "Replayed",
            ActorError::DecryptFailed => "DecryptFailed",
            ActorError::UnknownDid(_) => "UnknownDid",
            ActorError::NoContract => "NoContract",
            ActorError::InvalidBlinding => "InvalidBlinding",
            ActorError::InvalidSignature => "InvalidSignature",
            ActorError::NoCommonMode => "NoCommonMode",
            ActorError::NotImplemented(_) => "NotImplemented",
            ActorError::ProofInvalid => "ProofInvalid",
            ActorError::RevokedCredential => "RevokedCredential",
            ActorError::StaleRegistryVersion => "StaleRegistryVersion",
            ActorError::NoCredential(_) => "NoCredential",
            ActorError::UnknownEmsp(_) => "UnknownEmsp",
            ActorError::Expired => "Expired",
            ActorError::BadTag => "BadTag",
            ActorError::UnknownContract => "UnknownContract",
            ActorError::UnexpectedMessage { .. } => "UnexpectedMessage",
            ActorError::Rejected(_) => "Rejected",
            ActorError::Ledger(_) => "Ledger",
            ActorError::Crypto(_) => "Crypto",
            ActorError::Codec(_) => "Codec",
        }
    }
}

/// A Running or Commit event before the harness stamps it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub kind: TraceKind,
    pub label: Label,
    pub peer: String,
    pub ds: Vec<u8>,
}

/// Everything a handler may touch besides its own state.
pub struct Ctx<'a, S: CryptoSuite> {
    pub suite: &'a S,
    pub ledger: &'a Ledger<S>,
    /// Network endpoints of DIDs, as published out of band.
    pub directory: &'a BTreeMap<Did, Addr>,
    pub now: u64,
    pub me: Addr,
    pub outbox: Vec<(Addr, Vec<u8>)>,
    pub emitted: Vec<Emitted>,
}

impl<'a, S: CryptoSuite> Ctx<'a, S> {
    pub fn new(suite: &'a S, ledger: &'a Ledger<S>, directory: &'a BTreeMap<Did, Addr>, now: u64, me: Addr) -> Self {
        Self { suite, ledger, directory, now, me, outbox: Vec::new(), emitted: Vec::new() }
    }

    pub fn send(&mut self, to: Addr, env: &Envelope) {
        let bytes = env.encode().expect("actors only send registered message types");
        self.outbox.push((to, bytes));
    }

    pub fn send_raw(&mut self, to: Addr, bytes: Vec<u8>) {
        self.outbox.push((to, bytes));
    }

    pub fn running(&mut self, label: Label, peer: impl fmt::Display, ds: Vec<u8>) {
        self.emitted.push(Emitted { kind: TraceKind::Running, label, peer: peer.to_string(), ds });
    }

    pub fn commit(&mut self, label: Label, peer: impl fmt::Display, ds: Vec<u8>) {
        self.emitted.push(Emitted { kind: TraceKind::Commit, label, peer: peer.to_string(), ds });
    }
}

/// Concatenation of SHA-256 digests, the usual shape of agreement data.
pub fn digest_concat(parts: &[&[u8]]) -> Vec<u8> {
    parts.iter().flat_map(|p| crate::crypto::sha256(p)).collect()
}

pub(crate) fn unexpected(actor: Addr, env: &Envelope, state: &'static str) -> ActorError {
    ActorError::UnexpectedMessage { actor: actor.to_string(), message: env.name(), state }
}
