use std::collections::BTreeMap;

use num_bigint::BigUint;

use super::messages::*;
use super::steward::verinym_pop_input;
use super::{digest_concat, unexpected, ActorError, Addr, Ctx, Label};
use crate::codec::{tags, Bytes, Envelope, Wire};
use crate::crypto::{
    check_contract_auth, encode_attribute, issue_credential, random_array, ContractId, ContractKey, ContractStore,
    CryptoSuite, Did, DidKeys, Drbg, RevocationRegistry, RESERVED_SLOTS,
};
use crate::ledger::{CredentialDefinition, CredentialSchema, DidRecord, Role};

/// Issuer keys and the ledger objects published for them.
#[derive(Clone)]
pub struct IssuerMaterial<S: CryptoSuite> {
    pub public_key: S::IssuerPublicKey,
    pub secret_key: S::IssuerSecretKey,
    pub schema: CredentialSchema,
    pub cred_def_id: String,
    pub registry_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractStatus {
    Pending,
    Issued { rev_index: BigUint },
    Revoked,
}

#[derive(Debug, Clone)]
pub struct ContractRecord {
    pub prov_did: Did,
    pub key: ContractKey,
    pub attr_values: Vec<String>,
    pub status: ContractStatus,
}

/// One accepted billable session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BillingRecord {
    pub contract_id: ContractId,
    pub session_id: [u8; 16],
    pub meter_wh: u64,
    pub timestamp: u64,
    pub request_hash: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    New,
    AwaitChallenge,
    AwaitConfirmation,
    Onboarded,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::New => "new",
            Phase::AwaitChallenge => "await-challenge",
            Phase::AwaitConfirmation => "await-confirmation",
            Phase::Onboarded => "onboarded",
        }
    }
}

#[derive(Debug, Clone)]
struct PendingOffer {
    prov_did: Did,
    contract_id: ContractId,
    offer: CredentialOffer,
}

/// E-mobility service provider: verinym holder, credential issuer and
/// billing endpoint.
pub struct Emsp<S: CryptoSuite> {
    pub addr: Addr,
    pub emsp_id: String,
    pub keys: DidKeys,
    pub(crate) psk: ContractKey,
    rng: Drbg,
    phase: Phase,
    challenge_nonce: Option<[u8; 16]>,
    pub issuer: Option<IssuerMaterial<S>>,
    pub contracts: BTreeMap<ContractId, ContractRecord>,
    offers: BTreeMap<[u8; 16], PendingOffer>,
    pub store: ContractStore,
    pub billing: Vec<BillingRecord>,
    pub window_secs: u64,
    /// Fixture: sends attribute values that differ from the signed ones.
    pub tamper_issued_attrs: bool,
}

impl<S: CryptoSuite> Emsp<S> {
    pub fn new(addr: Addr, emsp_id: &str, keys: DidKeys, psk: ContractKey, rng: Drbg) -> Self {
        Self {
            addr,
            emsp_id: emsp_id.to_string(),
            keys,
            psk,
            rng,
            phase: Phase::New,
            challenge_nonce: None,
            issuer: None,
            contracts: BTreeMap::new(),
            offers: BTreeMap::new(),
            store: ContractStore::default(),
            billing: Vec::new(),
            window_secs: crate::crypto::DEFAULT_WINDOW_SECS,
            tamper_issued_attrs: false,
        }
    }

    pub fn verinym_record(&self) -> DidRecord {
        DidRecord::new(self.keys.did.clone(), &self.keys.public, Role::Verinym)
    }

    pub fn is_onboarded(&self) -> bool {
        self.phase == Phase::Onboarded
    }

    /// Long-term secrets held by this node, for leak checks.
    pub fn secrets(&self) -> Vec<Vec<u8>> {
        let mut out = vec![self.keys.secret.sig.0.clone(), self.keys.secret.enc.0.clone(), self.psk.0.to_vec()];
        out.extend(self.contracts.values().map(|c| c.key.0.to_vec()));
        out
    }

    /// Step 1: asks the steward for a verinym.
    pub fn start_onboarding(&mut self, ctx: &mut Ctx<'_, S>) {
        self.phase = Phase::AwaitChallenge;
        let req = VerinymChallengeReq { emsp_name: self.addr.to_string(), did: self.keys.did.clone() };
        ctx.send(Addr::Steward, &envelope(&req));
    }

    /// Publishes the contract schema, a credential definition and an empty
    /// revocation registry.
    pub fn publish_issuer(&mut self, ctx: &mut Ctx<'_, S>, modulus_bits: u64) -> Result<(), ActorError> {
        let schema = CredentialSchema::contract_baseline();
        let (pk, sk) =
            ctx.suite.issuer_keygen(schema.attr_names.len() + RESERVED_SLOTS, modulus_bits, &mut self.rng)?;
        let me = &self.keys.did;
        ctx.ledger.publish_schema(me, schema.clone())?;
        let def = CredentialDefinition::<S>::new(&schema.id, me.clone(), &self.emsp_id, pk.clone());
        let cred_def_id = ctx.ledger.publish_cred_def(me, def)?;
        let (params, initial) = ctx.suite.accumulator_setup(&pk, &mut self.rng);
        let registry = RevocationRegistry::<S>::new(&cred_def_id, params, initial);
        let registry_id = ctx.ledger.publish_registry(me, registry)?;
        self.issuer = Some(IssuerMaterial { public_key: pk, secret_key: sk, schema, cred_def_id, registry_id });
        Ok(())
    }

    /// Steps 2 and 3: concludes a contract for a provisioning DID handed
    /// over out of band.
    pub fn register_contract(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        prov_did: &Did,
        tariff: &str,
    ) -> Result<ContractId, ActorError> {
        ctx.ledger.get_did(prov_did).map_err(|_| ActorError::UnknownDid(prov_did.to_string()))?;
        let id = ContractId(random_array(&mut self.rng));
        let key = ContractKey(random_array(&mut self.rng));
        let contract_ref = hex::encode(random_array::<8>(&mut self.rng));
        let valid_until = (ctx.now + 365 * 86_400).to_string();
        let attr_values = vec![self.emsp_id.clone(), contract_ref, tariff.to_string(), valid_until];
        self.contracts.insert(
            id,
            ContractRecord { prov_did: prov_did.clone(), key, attr_values, status: ContractStatus::Pending },
        );
        Ok(id)
    }

    /// Revokes an issued contract credential on the ledger.
    pub fn revoke(&mut self, ctx: &mut Ctx<'_, S>, id: &ContractId) -> Result<u64, ActorError> {
        let issuer = self.issuer.as_ref().ok_or(ActorError::Rejected("issuer not set up".into()))?;
        let contract = self.contracts.get_mut(id).ok_or(ActorError::UnknownContract)?;
        let ContractStatus::Issued { rev_index } = &contract.status else {
            return Err(ActorError::Rejected("contract has no active credential".into()));
        };
        let registry = ctx.ledger.get_registry(&issuer.registry_id)?.value;
        let next = registry.revoke(ctx.suite, &issuer.secret_key, rev_index)?;
        let delta = next.deltas.last().expect("revocation appends a delta").clone();
        let version = ctx.ledger.update_accumulator(&self.keys.did, &issuer.registry_id, registry.version(), delta)?;
        contract.status = ContractStatus::Revoked;
        Ok(version)
    }

    pub fn handle(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, env: &Envelope) -> Result<(), ActorError> {
        match (env.msg_type, self.phase) {
            (tags::VERINYM_CHALLENGE_RES, Phase::AwaitChallenge) => self.on_challenge(ctx, from, open_envelope(env)?),
            (tags::WRITE_VERINYM_RES, Phase::AwaitConfirmation) => self.on_confirmation(ctx, open_envelope(env)?),
            (tags::GET_CRED_OFFER_REQ, Phase::Onboarded) => self.on_offer_request(ctx, from, open_envelope(env)?),
            (tags::CREATE_CONTRACT_CREDENTIAL_REQ, Phase::Onboarded) => {
                self.on_credential_request(ctx, from, open_envelope(env)?)
            }
            (tags::BILLING_FORWARD_REQ, Phase::Onboarded) => self.on_billing(ctx, from, open_envelope(env)?),
            _ => Err(unexpected(ctx.me, env, self.phase.name())),
        }
    }

    fn on_challenge(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, res: VerinymChallengeRes) -> Result<(), ActorError> {
        if from != Addr::Steward {
            return Err(ActorError::AuthFailed);
        }
        let record = self.verinym_record();
        let pop = ctx.suite.sign(&self.keys.secret, &verinym_pop_input(&res.nonce, &record));
        let body =
            VerinymBody { emsp_name: self.addr.to_string(), record: record.clone(), nonce: res.nonce, pop: Bytes(pop) };
        let mac = ctx.suite.hmac_tag(&self.psk, &body.to_bytes());
        ctx.running(Label::StewardVerinym, Addr::Steward, record.to_bytes());
        ctx.send(Addr::Steward, &envelope(&WriteVerinymReq { body, mac: Bytes(mac) }));
        self.challenge_nonce = Some(res.nonce);
        self.phase = Phase::AwaitConfirmation;
        Ok(())
    }

    fn on_confirmation(&mut self, ctx: &mut Ctx<'_, S>, res: WriteVerinymRes) -> Result<(), ActorError> {
        let nonce = self.challenge_nonce.ok_or(ActorError::NonceMismatch)?;
        let input = WriteVerinymRes::mac_input(&res.did, res.ledger_version, &res.nonce);
        if res.nonce != nonce || res.did != self.keys.did || !ctx.suite.hmac_verify(&self.psk, &input, &res.mac) {
            return Err(ActorError::AuthFailed);
        }
        let stored = ctx.ledger.get_did(&self.keys.did)?;
        if stored.value != self.verinym_record() {
            return Err(ActorError::Rejected("ledger record differs from the verinym".into()));
        }
        self.challenge_nonce = None;
        self.phase = Phase::Onboarded;
        Ok(())
    }

    fn on_offer_request(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, req: GetCredOfferReq) -> Result<(), ActorError> {
        let issuer = self.issuer.as_ref().ok_or(ActorError::Rejected("issuer not set up".into()))?;
        let prov = ctx
            .ledger
            .get_did(&req.body.prov_did)
            .map_err(|_| ActorError::UnknownDid(req.body.prov_did.to_string()))?
            .value;
        if !ctx.suite.verify(&prov.public_keys(), &req.body.to_bytes(), &req.sig) {
            return Err(ActorError::BadSignature);
        }
        let (contract_id, _) = self
            .contracts
            .iter()
            .find(|(_, c)| c.prov_did == req.body.prov_did && c.status == ContractStatus::Pending)
            .ok_or(ActorError::NoContract)?;
        let offer = CredentialOffer {
            cred_def_id: issuer.cred_def_id.clone(),
            schema_id: issuer.schema.id.clone(),
            nonce: random_array(&mut self.rng),
        };
        let body = OfferBody { offer: offer.clone(), request_nonce: req.body.nonce };
        let sealed =
            ctx.suite.pk_encrypt(&prov.public_keys(), Some(&self.keys.secret), &body.to_bytes(), &mut self.rng);
        self.offers.insert(offer.nonce, PendingOffer { prov_did: prov.did, contract_id: *contract_id, offer });
        ctx.send(from, &envelope(&GetCredOfferRes { emsp_did: self.keys.did.clone(), sealed: Bytes(sealed) }));
        Ok(())
    }

    fn on_credential_request(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: CreateContractCredentialReq,
    ) -> Result<(), ActorError> {
        let issuer = self.issuer.clone().ok_or(ActorError::Rejected("issuer not set up".into()))?;
        let opened = ctx.suite.pk_decrypt(&self.keys.secret, &req.sealed)?;
        let body = CredRequestBody::<S>::from_bytes(&opened.plaintext)?;
        let pending = self.offers.get(&body.offer_nonce).ok_or(ActorError::NonceMismatch)?.clone();
        if pending.prov_did != body.prov_did {
            return Err(ActorError::NonceMismatch);
        }
        let prov = ctx.ledger.get_did(&pending.prov_did)?.value;
        if opened.sender.as_ref() != Some(&prov.enc_pk) {
            return Err(ActorError::AuthFailed);
        }
        let signed = CredRequestBody::<S>::signed_part(&body.prov_did, &body.offer_nonce, &body.blinded);
        if !ctx.suite.verify(&prov.public_keys(), &signed, &body.sig) {
            return Err(ActorError::BadSignature);
        }
        let contract = self.contracts.get(&pending.contract_id).ok_or(ActorError::NoContract)?.clone();
        if contract.status != ContractStatus::Pending {
            return Err(ActorError::NoContract);
        }
        self.offers.remove(&body.offer_nonce);
        let attrs: Vec<BigUint> = contract.attr_values.iter().map(|v| encode_attribute(v)).collect();
        let registry = ctx.ledger.get_registry(&issuer.registry_id)?.value;
        let issuance = issue_credential(
            ctx.suite,
            &issuer.public_key,
            &issuer.secret_key,
            &body.blinded,
            &body.offer_nonce,
            &attrs,
            &registry,
            &mut self.rng,
        )?;
        let delta = issuance.registry.deltas.last().expect("issuance appends a delta").clone();
        ctx.ledger.update_accumulator(&self.keys.did, &issuer.registry_id, registry.version(), delta)?;
        let mut attr_values = contract.attr_values.clone();
        if self.tamper_issued_attrs {
            attr_values[2].push_str("-premium");
        }
        let response = CredResponseBody::<S> {
            offer_nonce: body.offer_nonce,
            pre_credential: issuance.pre_credential.clone(),
            attr_values,
            rev_index: issuance.rev_index.clone(),
            registry_id: issuer.registry_id.clone(),
            witness: issuance.witness,
            contract_id: pending.contract_id,
            contract_key: contract.key.clone(),
        };
        let sealed =
            ctx.suite.pk_encrypt(&prov.public_keys(), Some(&self.keys.secret), &response.to_bytes(), &mut self.rng);
        ctx.running(
            Label::CredInstall,
            &pending.prov_did,
            cred_install_ds::<S>(&pending.offer, &body.blinded, &issuance.pre_credential),
        );
        self.store.insert(pending.contract_id, contract.key.clone());
        if let Some(c) = self.contracts.get_mut(&pending.contract_id) {
            c.status = ContractStatus::Issued { rev_index: issuance.rev_index };
        }
        ctx.send(from, &envelope(&CreateContractCredentialRes { sealed: Bytes(sealed) }));
        Ok(())
    }

    fn on_billing(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, req: BillingForwardReq) -> Result<(), ActorError> {
        let result = if req.emsp_id != self.emsp_id {
            Err(ActorError::UnknownEmsp(req.emsp_id.clone()))
        } else {
            check_contract_auth(
                ctx.suite,
                &self.keys.secret,
                &mut self.store,
                &req.contract_auth,
                &req.request_hash,
                ctx.now,
                self.window_secs,
            )
            .map_err(ActorError::from)
        };
        let ack = |accepted: bool, reason: String| BillingAck { session_id: req.session_id, accepted, reason };
        match result {
            Ok(payload) => {
                self.billing.push(BillingRecord {
                    contract_id: payload.contract_id,
                    session_id: req.session_id,
                    meter_wh: req.meter_wh,
                    timestamp: payload.timestamp,
                    request_hash: req.request_hash,
                });
                ctx.commit(
                    Label::Billing,
                    payload.contract_id,
                    billing_ds(&req.request_hash, &payload.contract_id, payload.timestamp),
                );
                ctx.send(from, &envelope(&ack(true, String::new())));
                Ok(())
            }
            Err(e) => {
                ctx.send(from, &envelope(&ack(false, e.name().to_string())));
                Err(e)
            }
        }
    }
}

pub(crate) fn cred_install_ds<S: CryptoSuite>(
    offer: &CredentialOffer,
    blinded: &S::BlindedSecret,
    pre: &S::PreCredential,
) -> Vec<u8> {
    digest_concat(&[&offer.to_bytes(), &blinded.to_bytes(), &pre.to_bytes()])
}

pub(crate) fn billing_ds(request_hash: &[u8; 32], contract_id: &ContractId, timestamp: u64) -> Vec<u8> {
    let mut ds = request_hash.to_vec();
    ds.extend_from_slice(&contract_id.0);
    ds.extend_from_slice(&timestamp.to_be_bytes());
    ds
}
