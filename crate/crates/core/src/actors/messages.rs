//! Message catalogue. Every struct tagged with a message tag is sent as an
//! envelope payload; the `*Body` records travel inside sealed boxes.

use std::collections::BTreeSet;

use crate::codec::{tags, Bytes, CodecError, Envelope, Record, Wire};
use crate::crypto::{ContractId, ContractKey, CryptoSuite, Did, ProofRequest, Witness};
use crate::ledger::DidRecord;
use crate::wire_record;

/// Wraps a message record in an envelope.
pub fn envelope<M: Record>(msg: &M) -> Envelope {
    Envelope::new(M::TAG, msg.to_wire())
}

/// Extracts a message record, checking the envelope type.
pub fn open_envelope<M: Record>(env: &Envelope) -> Result<M, CodecError> {
    if env.msg_type != M::TAG {
        return Err(CodecError::UnknownTag(env.msg_type));
    }
    M::from_wire(&env.payload)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerinymChallengeReq {
    pub emsp_name: String,
    pub did: Did,
}
wire_record!(VerinymChallengeReq = tags::VERINYM_CHALLENGE_REQ; { emsp_name, did });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerinymChallengeRes {
    pub nonce: [u8; 16],
}
wire_record!(VerinymChallengeRes = tags::VERINYM_CHALLENGE_RES; { nonce });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerinymBody {
    pub emsp_name: String,
    pub record: DidRecord,
    pub nonce: [u8; 16],
    /// Signature by the verinym key over the nonce and the record.
    pub pop: Bytes,
}
wire_record!(VerinymBody = tags::VERINYM_BODY; { emsp_name, record, nonce, pop });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteVerinymReq {
    pub body: VerinymBody,
    /// HMAC of the body under the pre-shared key.
    pub mac: Bytes,
}
wire_record!(WriteVerinymReq = tags::WRITE_VERINYM_REQ; { body, mac });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteVerinymRes {
    pub did: Did,
    pub ledger_version: u64,
    pub nonce: [u8; 16],
    pub mac: Bytes,
}
wire_record!(WriteVerinymRes = tags::WRITE_VERINYM_RES; { did, ledger_version, nonce, mac });

impl WriteVerinymRes {
    pub fn mac_input(did: &Did, version: u64, nonce: &[u8; 16]) -> Vec<u8> {
        (did.clone(), (version, *nonce)).to_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitNymReq {
    pub oem_id: String,
    pub nonce_ev: [u8; 16],
}
wire_record!(InitNymReq = tags::INIT_NYM_REQ; { oem_id, nonce_ev });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitNymBody {
    pub steward_did: Did,
    pub nonce_ev: [u8; 16],
    pub nonce_st: [u8; 16],
    pub oem_id: String,
    pub sig: Bytes,
}
wire_record!(InitNymBody = tags::INIT_NYM_BODY; { steward_did, nonce_ev, nonce_st, oem_id, sig });

impl InitNymBody {
    pub fn signed_part(steward_did: &Did, nonce_ev: &[u8; 16], nonce_st: &[u8; 16], oem_id: &str) -> Vec<u8> {
        (steward_did.clone(), (*nonce_ev, (*nonce_st, oem_id.to_string()))).to_bytes()
    }
}

/// Sealed [`InitNymBody`], encrypted for the OEM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitNymRes {
    pub sealed: Bytes,
}
wire_record!(InitNymRes = tags::INIT_NYM_RES; { sealed });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvDidBody {
    pub record: DidRecord,
    pub nonce_ev: [u8; 16],
    pub nonce_st: [u8; 16],
    /// Signature by the provisioning key over the steward nonce and record.
    pub pop: Bytes,
}
wire_record!(ProvDidBody = tags::PROV_DID_BODY; { record, nonce_ev, nonce_st, pop });

impl ProvDidBody {
    pub fn pop_input(nonce_st: &[u8; 16], record: &DidRecord) -> Vec<u8> {
        (*nonce_st, record.clone()).to_bytes()
    }
}

/// Sealed [`ProvDidBody`], encrypted for the steward by the OEM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterProvisioningDid {
    pub sealed: Bytes,
}
wire_record!(RegisterProvisioningDid = tags::REGISTER_PROVISIONING_DID; { sealed });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredOfferRequestBody {
    pub prov_did: Did,
    pub nonce: [u8; 16],
}
wire_record!(CredOfferRequestBody = tags::CRED_OFFER_REQUEST_BODY; { prov_did, nonce });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetCredOfferReq {
    pub body: CredOfferRequestBody,
    pub sig: Bytes,
}
wire_record!(GetCredOfferReq = tags::GET_CRED_OFFER_REQ; { body, sig });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialOffer {
    pub cred_def_id: String,
    pub schema_id: String,
    pub nonce: [u8; 16],
}
wire_record!(CredentialOffer = tags::CREDENTIAL_OFFER; { cred_def_id, schema_id, nonce });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfferBody {
    pub offer: CredentialOffer,
    pub request_nonce: [u8; 16],
}
wire_record!(OfferBody = tags::OFFER_BODY; { offer, request_nonce });

/// The EMSP's verinym and a sealed [`OfferBody`] for the provisioning DID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetCredOfferRes {
    pub emsp_did: Did,
    pub sealed: Bytes,
}
wire_record!(GetCredOfferRes = tags::GET_CRED_OFFER_RES; { emsp_did, sealed });

#[derive(Debug, Clone)]
pub struct CredRequestBody<S: CryptoSuite> {
    pub prov_did: Did,
    pub offer_nonce: [u8; 16],
    pub blinded: S::BlindedSecret,
    pub sig: Bytes,
}
wire_record!(impl[S: CryptoSuite] CredRequestBody<S> = tags::CRED_REQUEST_BODY; {
    prov_did, offer_nonce, blinded, sig
});

impl<S: CryptoSuite> CredRequestBody<S> {
    pub fn signed_part(prov_did: &Did, offer_nonce: &[u8; 16], blinded: &S::BlindedSecret) -> Vec<u8> {
        (prov_did.clone(), (*offer_nonce, Bytes(blinded.to_bytes()))).to_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateContractCredentialReq {
    pub sealed: Bytes,
}
wire_record!(CreateContractCredentialReq = tags::CREATE_CONTRACT_CREDENTIAL_REQ; { sealed });

#[derive(Debug, Clone)]
pub struct CredResponseBody<S: CryptoSuite> {
    pub offer_nonce: [u8; 16],
    pub pre_credential: S::PreCredential,
    pub attr_values: Vec<String>,
    pub rev_index: num_bigint::BigUint,
    pub registry_id: String,
    pub witness: Witness,
    pub contract_id: ContractId,
    pub contract_key: ContractKey,
}
wire_record!(impl[S: CryptoSuite] CredResponseBody<S> = tags::CRED_RESPONSE_BODY; {
    offer_nonce, pre_credential, attr_values, rev_index, registry_id, witness, contract_id, contract_key
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateContractCredentialRes {
    pub sealed: Bytes,
}
wire_record!(CreateContractCredentialRes = tags::CREATE_CONTRACT_CREDENTIAL_RES; { sealed });

/// Identification modes offered during service discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AuthMode {
    ExternalPayment,
    PncPki,
    ContractProof,
}

impl AuthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthMode::ExternalPayment => "ExternalPayment",
            AuthMode::PncPki => "PnC-PKI",
            AuthMode::ContractProof => "ContractProof",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [AuthMode::ExternalPayment, AuthMode::PncPki, AuthMode::ContractProof].into_iter().find(|m| m.as_str() == s)
    }

    /// Negotiation: the most preferred mode both sides support.
    pub fn negotiate(ours: &BTreeSet<AuthMode>, theirs: &BTreeSet<AuthMode>) -> Option<AuthMode> {
        ours.intersection(theirs).last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDiscoveryReq {
    pub modes: BTreeSet<String>,
}
wire_record!(ServiceDiscoveryReq = tags::SERVICE_DISCOVERY_REQ; { modes });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDiscoveryRes {
    pub cp_id: String,
    /// Selected mode; empty when there is no common mode.
    pub mode: String,
}
wire_record!(ServiceDiscoveryRes = tags::SERVICE_DISCOVERY_RES; { cp_id, mode });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestProofReq {
    pub cred_def_id: String,
}
wire_record!(RequestProofReq = tags::REQUEST_PROOF_REQ; { cred_def_id });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestProofRes {
    pub session_id: [u8; 16],
    pub request: ProofRequest,
}
wire_record!(RequestProofRes = tags::REQUEST_PROOF_RES; { session_id, request });

#[derive(Debug, Clone)]
pub struct ValidateContractProofReq<S: CryptoSuite> {
    pub session_id: [u8; 16],
    pub presentation: S::Presentation,
    /// Contract authentication data sealed for the EMSP.
    pub contract_auth: Bytes,
}
wire_record!(impl[S: CryptoSuite] ValidateContractProofReq<S> = tags::VALIDATE_CONTRACT_PROOF_REQ; {
    session_id, presentation, contract_auth
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidateContractProofRes {
    pub session_id: [u8; 16],
    pub status: String,
}
wire_record!(ValidateContractProofRes = tags::VALIDATE_CONTRACT_PROOF_RES; { session_id, status });

pub const STATUS_AUTHORIZED: &str = "Authorized";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BillingForwardReq {
    pub session_id: [u8; 16],
    pub meter_wh: u64,
    pub request_hash: [u8; 32],
    pub emsp_id: String,
    /// Charge point location; removed by the CPO before forwarding.
    pub location: Option<String>,
    pub contract_auth: Bytes,
}
wire_record!(BillingForwardReq = tags::BILLING_FORWARD_REQ; {
    session_id, meter_wh, request_hash, emsp_id, location, contract_auth
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BillingAck {
    pub session_id: [u8; 16],
    pub accepted: bool,
    pub reason: String,
}
wire_record!(BillingAck = tags::BILLING_ACK; { session_id, accepted, reason });

/// Opaque frame relayed by a CP for an offline EV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayFrame {
    pub target: String,
    pub inner: Bytes,
}
wire_record!(RelayFrame = tags::RELAY_FRAME; { target, inner });

/// Field names of every named record, for flattening observed messages.
pub fn record_fields<S: CryptoSuite>(tag: u16) -> Option<&'static [&'static str]> {
    use crate::crypto::{cl, ContractAuthPayload, DeltaEntry, RevocationRegistry, SymbolicToken};
    use crate::ledger::{CredentialDefinition, CredentialSchema, LedgerEntry, LedgerState};
    macro_rules! lookup {
        ($($ty:ty),* $(,)?) => {
            $(if tag == <$ty as Record>::TAG { return Some(<$ty as Record>::FIELDS); })*
        };
    }
    lookup!(
        VerinymChallengeReq,
        VerinymChallengeRes,
        VerinymBody,
        WriteVerinymReq,
        WriteVerinymRes,
        InitNymReq,
        InitNymBody,
        InitNymRes,
        ProvDidBody,
        RegisterProvisioningDid,
        CredOfferRequestBody,
        GetCredOfferReq,
        CredentialOffer,
        OfferBody,
        GetCredOfferRes,
        CredRequestBody<S>,
        CreateContractCredentialReq,
        CredResponseBody<S>,
        CreateContractCredentialRes,
        ServiceDiscoveryReq,
        ServiceDiscoveryRes,
        RequestProofReq,
        RequestProofRes,
        ValidateContractProofReq<S>,
        ValidateContractProofRes,
        BillingForwardReq,
        BillingAck,
        RelayFrame,
        ProofRequest,
        Witness,
        ContractAuthPayload,
        DeltaEntry,
        RevocationRegistry<S>,
        DidRecord,
        CredentialSchema,
        CredentialDefinition<S>,
        LedgerEntry<S>,
        LedgerState<S>,
        SymbolicToken,
        cl::ClPresentation,
        cl::ClNonRevProof,
        cl::ClIssuerPublicKey,
        cl::ClAccParams,
        cl::ClBlindedSecret,
        cl::ClPreCredential,
        crate::crypto::SymPresentation,
    );
    None
}
