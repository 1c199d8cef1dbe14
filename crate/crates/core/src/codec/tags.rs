//! Registered 16-bit tags.
//!
//! Message tags (`0x0001..=0x00ff`) identify protocol messages on the wire.
//! Record tags (`0x0100..=0xfeff`) identify structured values nested inside
//! messages, ledger entries and keystores. Primitive value kinds use the
//! reserved `0xff00..` block. Assignments are part of the wire contract and
//! must never be renumbered.

// Primitive value kinds.
pub const UINT: u16 = 0xff01;
pub const BYTES: u16 = 0xff02;
pub const TEXT: u16 = 0xff03;
pub const SEQ: u16 = 0xff04;

// Protocol messages.
pub const INIT_NYM_REQ: u16 = 0x0001;
pub const INIT_NYM_RES: u16 = 0x0002;
pub const REGISTER_PROVISIONING_DID: u16 = 0x0003;
pub const WRITE_VERINYM_REQ: u16 = 0x0004;
pub const WRITE_VERINYM_RES: u16 = 0x0005;
pub const GET_CRED_OFFER_REQ: u16 = 0x0006;
pub const GET_CRED_OFFER_RES: u16 = 0x0007;
pub const CREATE_CONTRACT_CREDENTIAL_REQ: u16 = 0x0008;
pub const CREATE_CONTRACT_CREDENTIAL_RES: u16 = 0x0009;
pub const SERVICE_DISCOVERY_REQ: u16 = 0x000a;
pub const SERVICE_DISCOVERY_RES: u16 = 0x000b;
pub const REQUEST_PROOF_REQ: u16 = 0x000c;
pub const REQUEST_PROOF_RES: u16 = 0x000d;
pub const VALIDATE_CONTRACT_PROOF_REQ: u16 = 0x000e;
pub const VALIDATE_CONTRACT_PROOF_RES: u16 = 0x000f;
pub const BILLING_FORWARD_REQ: u16 = 0x0010;
pub const BILLING_ACK: u16 = 0x0011;
pub const VERINYM_CHALLENGE_REQ: u16 = 0x0012;
pub const VERINYM_CHALLENGE_RES: u16 = 0x0013;
pub const RELAY_FRAME: u16 = 0x0014;

// Registry objects.
pub const DID_RECORD: u16 = 0x0100;
pub const CREDENTIAL_SCHEMA: u16 = 0x0102;
pub const CRED_DEF: u16 = 0x0103;
pub const REV_REGISTRY: u16 = 0x0104;
pub const DELTA_ENTRY: u16 = 0x0105;
pub const PROOF_REQUEST: u16 = 0x0106;
pub const CONTRACT_AUTH_PAYLOAD: u16 = 0x0107;
pub const CREDENTIAL_OFFER: u16 = 0x0108;
pub const LEDGER_ENTRY: u16 = 0x0109;
pub const LEDGER_STATE: u16 = 0x010a;
pub const TRACE_EVENT: u16 = 0x010b;
pub const MESSAGE_LOG_ENTRY: u16 = 0x010c;
pub const KEYSTORE: u16 = 0x010d;
pub const KEYSTORE_CONTENT: u16 = 0x010e;
pub const ATTRIBUTE: u16 = 0x010f;
pub const WITNESS: u16 = 0x0110;
pub const DID_SECRET_KEYS: u16 = 0x0111;
pub const CONTRACT_CREDENTIAL: u16 = 0x0112;
pub const ADVERSARY_ACTION: u16 = 0x0113;

// Concrete (CL-RSA) crypto values.
pub const CL_ISSUER_PUBLIC_KEY: u16 = 0x0120;
pub const CL_ISSUER_SECRET_KEY: u16 = 0x0121;
pub const CL_BLINDED_SECRET: u16 = 0x0122;
pub const CL_PRE_CREDENTIAL: u16 = 0x0123;
pub const CL_CREDENTIAL: u16 = 0x0124;
pub const CL_PRESENTATION: u16 = 0x0125;
pub const CL_NONREV_PROOF: u16 = 0x0126;
pub const CL_ACC_PARAMS: u16 = 0x0127;
pub const CL_BLINDING_FACTOR: u16 = 0x0128;
pub const CL_HIDDEN_RESPONSE: u16 = 0x0129;

// Symbolic crypto values.
pub const SYM_TOKEN: u16 = 0x0130;
pub const SYM_ISSUER_PUBLIC_KEY: u16 = 0x0131;
pub const SYM_ISSUER_SECRET_KEY: u16 = 0x0132;
pub const SYM_CREDENTIAL: u16 = 0x0133;
pub const SYM_PRESENTATION: u16 = 0x0134;
pub const SYM_ACC_PARAMS: u16 = 0x0135;
pub const SYM_BLINDING_FACTOR: u16 = 0x0136;

// Ledger operations.
pub const OP_WRITE_DID: u16 = 0x0140;
pub const OP_SCHEMA: u16 = 0x0141;
pub const OP_CRED_DEF: u16 = 0x0142;
pub const OP_REGISTRY: u16 = 0x0143;
pub const OP_ACC_UPDATE: u16 = 0x0144;

// Signed or sealed message bodies.
pub const INIT_NYM_BODY: u16 = 0x0150;
pub const PROV_DID_BODY: u16 = 0x0151;
pub const OFFER_BODY: u16 = 0x0152;
pub const CRED_REQUEST_BODY: u16 = 0x0153;
pub const CRED_RESPONSE_BODY: u16 = 0x0154;
pub const VERINYM_BODY: u16 = 0x0155;
pub const CRED_OFFER_REQUEST_BODY: u16 = 0x0156;

const TABLE: &[(u16, &str)] = &[
    (INIT_NYM_REQ, "InitNymReq"),
    (INIT_NYM_RES, "InitNymRes"),
    (REGISTER_PROVISIONING_DID, "RegisterProvisioningDid"),
    (WRITE_VERINYM_REQ, "WriteVerinymReq"),
    (WRITE_VERINYM_RES, "WriteVerinymRes"),
    (GET_CRED_OFFER_REQ, "GetCredOfferReq"),
    (GET_CRED_OFFER_RES, "GetCredOfferRes"),
    (CREATE_CONTRACT_CREDENTIAL_REQ, "CreateContractCredentialReq"),
    (CREATE_CONTRACT_CREDENTIAL_RES, "CreateContractCredentialRes"),
    (SERVICE_DISCOVERY_REQ, "ServiceDiscoveryReq"),
    (SERVICE_DISCOVERY_RES, "ServiceDiscoveryRes"),
    (REQUEST_PROOF_REQ, "RequestProofReq"),
    (REQUEST_PROOF_RES, "RequestProofRes"),
    (VALIDATE_CONTRACT_PROOF_REQ, "ValidateContractProofReq"),
    (VALIDATE_CONTRACT_PROOF_RES, "ValidateContractProofRes"),
    (BILLING_FORWARD_REQ, "BillingForwardReq"),
    (BILLING_ACK, "BillingAck"),
    (VERINYM_CHALLENGE_REQ, "VerinymChallengeReq"),
    (VERINYM_CHALLENGE_RES, "VerinymChallengeRes"),
    (RELAY_FRAME, "RelayFrame"),
    (DID_RECORD, "DidRecord"),
    (CREDENTIAL_SCHEMA, "CredentialSchema"),
    (CRED_DEF, "CredentialDefinition"),
    (REV_REGISTRY, "RevocationRegistry"),
    (DELTA_ENTRY, "DeltaEntry"),
    (PROOF_REQUEST, "ProofRequest"),
    (CONTRACT_AUTH_PAYLOAD, "ContractAuthPayload"),
    (CREDENTIAL_OFFER, "CredentialOffer"),
    (LEDGER_ENTRY, "LedgerEntry"),
    (LEDGER_STATE, "LedgerState"),
    (TRACE_EVENT, "TraceEvent"),
    (MESSAGE_LOG_ENTRY, "MessageLogEntry"),
    (KEYSTORE, "Keystore"),
    (KEYSTORE_CONTENT, "KeystoreContent"),
    (ATTRIBUTE, "Attribute"),
    (WITNESS, "Witness"),
    (DID_SECRET_KEYS, "DidSecretKeys"),
    (CONTRACT_CREDENTIAL, "ContractCredential"),
    (ADVERSARY_ACTION, "AdversaryAction"),
    (CL_ISSUER_PUBLIC_KEY, "ClIssuerPublicKey"),
    (CL_ISSUER_SECRET_KEY, "ClIssuerSecretKey"),
    (CL_BLINDED_SECRET, "ClBlindedSecret"),
    (CL_PRE_CREDENTIAL, "ClPreCredential"),
    (CL_CREDENTIAL, "ClCredential"),
    (CL_PRESENTATION, "ClPresentation"),
    (CL_NONREV_PROOF, "ClNonRevocationProof"),
    (CL_ACC_PARAMS, "ClAccumulatorParams"),
    (CL_BLINDING_FACTOR, "ClBlindingFactor"),
    (CL_HIDDEN_RESPONSE, "ClHiddenResponse"),
    (SYM_TOKEN, "SymToken"),
    (SYM_ISSUER_PUBLIC_KEY, "SymIssuerPublicKey"),
    (SYM_ISSUER_SECRET_KEY, "SymIssuerSecretKey"),
    (SYM_CREDENTIAL, "SymCredential"),
    (SYM_PRESENTATION, "SymPresentation"),
    (SYM_ACC_PARAMS, "SymAccumulatorParams"),
    (SYM_BLINDING_FACTOR, "SymBlindingFactor"),
    (OP_WRITE_DID, "OpWriteDid"),
    (OP_SCHEMA, "OpPublishSchema"),
    (OP_CRED_DEF, "OpPublishCredDef"),
    (OP_REGISTRY, "OpPublishRegistry"),
    (OP_ACC_UPDATE, "OpAccumulatorUpdate"),
    (INIT_NYM_BODY, "InitNymBody"),
    (PROV_DID_BODY, "ProvDidBody"),
    (OFFER_BODY, "OfferBody"),
    (CRED_REQUEST_BODY, "CredRequestBody"),
    (CRED_RESPONSE_BODY, "CredResponseBody"),
    (VERINYM_BODY, "VerinymBody"),
    (CRED_OFFER_REQUEST_BODY, "CredOfferRequestBody"),
];

/// Human-readable name of a registered record or message tag.
pub fn name(tag: u16) -> Option<&'static str> {
    TABLE.iter().find(|(t, _)| *t == tag).map(|(_, n)| *n)
}

/// Looks up a tag by its registered name.
pub fn by_name(name: &str) -> Option<u16> {
    TABLE.iter().find(|(_, n)| *n == name).map(|(t, _)| *t)
}

pub fn is_registered_record(tag: u16) -> bool {
    name(tag).is_some()
}

pub fn is_message(tag: u16) -> bool {
    (0x0001..=0x00ff).contains(&tag) && name(tag).is_some()
}

/// All registered `(tag, name)` pairs, in table order.
pub fn all() -> &'static [(u16, &'static str)] {
    TABLE
}
