use std::collections::BTreeSet;

use num_bigint::BigUint;

use super::emsp::{billing_ds, cred_install_ds};
use super::messages::*;
use super::steward::prov_did_ds;
use super::{digest_concat, unexpected, ActorError, Addr, Ctx, Label};
use crate::codec::{tags, Bytes, Envelope, Wire};
use crate::crypto::{
    encode_attribute, make_contract_auth, random_array, ContractId, ContractKey, CryptoSuite, Did, DidKeys,
    DidPublicKeys, Drbg, MasterSecret, ProofRequest, Witness,
};
use crate::ledger::{CredentialDefinition, DidRecord, Role, EMSP_ID_ATTR};

/// Deliberately broken behaviours used as checker fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    None,
    /// Puts the contract id in clear text into the envelope sender hint.
    LeakContractId,
}

/// An installed contract credential with everything needed to present it
/// and to authenticate billing.
#[derive(Clone)]
pub struct ContractCredential<S: CryptoSuite> {
    pub emsp: Addr,
    pub emsp_did: Did,
    pub cred_def_id: String,
    pub registry_id: String,
    pub attr_names: Vec<String>,
    pub attr_values: Vec<String>,
    pub credential: S::Credential,
    pub rev_index: BigUint,
    pub witness: Witness,
    pub contract_id: ContractId,
    pub contract_key: ContractKey,
}

enum Install<S: CryptoSuite> {
    Idle,
    AwaitOffer { emsp: Addr, request_nonce: [u8; 16] },
    AwaitCredential(Box<PendingIssue<S>>),
}

struct PendingIssue<S: CryptoSuite> {
    emsp: Addr,
    emsp_did: Did,
    offer: CredentialOffer,
    cred_def: CredentialDefinition<S>,
    ms: MasterSecret,
    factor: S::BlindingFactor,
    blinded: S::BlindedSecret,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Charge {
    Idle,
    AwaitDiscovery { cp: Addr },
    AwaitProofRequest { cp: Addr },
    AwaitValidation { cp: Addr, session_id: [u8; 16] },
}

impl Charge {
    fn name(&self) -> &'static str {
        match self {
            Charge::Idle => "idle",
            Charge::AwaitDiscovery { .. } => "await-discovery",
            Charge::AwaitProofRequest { .. } => "await-proof-request",
            Charge::AwaitValidation { .. } => "await-validation",
        }
    }
}

/// The vehicle together with its OEM identity during provisioning.
pub struct EvWallet<S: CryptoSuite> {
    pub addr: Addr,
    pub oem_id: String,
    pub(crate) oem_keys: DidKeys,
    steward_did: Did,
    steward_keys: DidPublicKeys,
    rng: Drbg,
    pending_nym: Option<[u8; 16]>,
    pub prov: Option<DidKeys>,
    install: Install<S>,
    pub credentials: Vec<ContractCredential<S>>,
    pub modes: BTreeSet<AuthMode>,
    charge: Charge,
    /// Attributes this wallet agrees to disclose.
    pub disclosable: BTreeSet<String>,
    /// CP that relays EMSP traffic while the vehicle has no own uplink.
    pub relay_via: Option<Addr>,
    pub fixture: Fixture,
    pub authorized_sessions: u64,
}

impl<S: CryptoSuite> EvWallet<S> {
    pub fn new(addr: Addr, oem_id: &str, oem_keys: DidKeys, steward: &DidRecord, rng: Drbg) -> Self {
        Self {
            addr,
            oem_id: oem_id.to_string(),
            oem_keys,
            steward_did: steward.did.clone(),
            steward_keys: steward.public_keys(),
            rng,
            pending_nym: None,
            prov: None,
            install: Install::Idle,
            credentials: Vec::new(),
            modes: [AuthMode::ExternalPayment, AuthMode::ContractProof].into(),
            charge: Charge::Idle,
            disclosable: [EMSP_ID_ATTR.to_string()].into(),
            relay_via: None,
            fixture: Fixture::None,
            authorized_sessions: 0,
        }
    }

    pub fn prov_did(&self) -> Option<&Did> {
        self.prov.as_ref().map(|k| &k.did)
    }

    /// Long-term secrets held by this node, for leak checks.
    pub fn secrets(&self) -> Vec<Vec<u8>> {
        let mut out = vec![self.oem_keys.secret.sig.0.clone(), self.oem_keys.secret.enc.0.clone()];
        if let Some(p) = &self.prov {
            out.push(p.secret.sig.0.clone());
            out.push(p.secret.enc.0.clone());
        }
        for c in &self.credentials {
            out.push(c.contract_key.0.to_vec());
        }
        if let Install::AwaitCredential(p) = &self.install {
            out.push(p.ms.0.to_vec());
        }
        out
    }

    fn send_to_emsp(&mut self, ctx: &mut Ctx<'_, S>, emsp: Addr, env: &Envelope) {
        match self.relay_via {
            Some(cp) => {
                let inner = env.encode().expect("registered message type");
                ctx.send(cp, &envelope(&RelayFrame { target: emsp.to_string(), inner: Bytes(inner) }));
            }
            None => ctx.send(emsp, env),
        }
    }

    /// Provisioning step 1: the OEM side opens the exchange with the steward.
    pub fn start_provisioning(&mut self, ctx: &mut Ctx<'_, S>) {
        let nonce_ev: [u8; 16] = random_array(&mut self.rng);
        self.pending_nym = Some(nonce_ev);
        ctx.send(Addr::Steward, &envelope(&InitNymReq { oem_id: self.oem_id.clone(), nonce_ev }));
    }

    /// Steps 4 and 5: asks the EMSP for a credential offer.
    pub fn start_install(&mut self, ctx: &mut Ctx<'_, S>, emsp: Addr) -> Result<(), ActorError> {
        let prov = self.prov.as_ref().ok_or(ActorError::Rejected("no provisioning DID".into()))?;
        let body = CredOfferRequestBody { prov_did: prov.did.clone(), nonce: random_array(&mut self.rng) };
        let sig = ctx.suite.sign(&prov.secret, &body.to_bytes());
        self.install = Install::AwaitOffer { emsp, request_nonce: body.nonce };
        self.send_to_emsp(ctx, emsp, &envelope(&GetCredOfferReq { body, sig: Bytes(sig) }));
        Ok(())
    }

    /// Step 9: service discovery with a charge point, followed by the proof
    /// request exchange.
    pub fn start_charge(&mut self, ctx: &mut Ctx<'_, S>, cp: Addr) {
        self.charge = Charge::AwaitDiscovery { cp };
        let modes = self.modes.iter().map(|m| m.as_str().to_string()).collect();
        ctx.send(cp, &envelope(&ServiceDiscoveryReq { modes }));
    }

    pub fn handle(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, env: &Envelope) -> Result<(), ActorError> {
        match env.msg_type {
            tags::INIT_NYM_RES => self.on_init_nym(ctx, from, env, open_envelope(env)?),
            tags::GET_CRED_OFFER_RES => self.on_offer(ctx, from, env, open_envelope(env)?),
            tags::CREATE_CONTRACT_CREDENTIAL_RES => self.on_credential(ctx, from, env, open_envelope(env)?),
            tags::SERVICE_DISCOVERY_RES => self.on_discovery(ctx, from, env, open_envelope(env)?),
            tags::REQUEST_PROOF_RES => self.on_proof_request(ctx, from, env, open_envelope(env)?),
            tags::VALIDATE_CONTRACT_PROOF_RES => self.on_validation(ctx, from, env, open_envelope(env)?),
            tags::RELAY_FRAME => {
                let frame: RelayFrame = open_envelope(env)?;
                if Some(from) != self.relay_via {
                    return Err(unexpected(ctx.me, env, "not relaying"));
                }
                let origin: Addr = frame.target.parse().map_err(ActorError::Rejected)?;
                let inner = Envelope::decode(&frame.inner)?;
                if inner.msg_type == tags::RELAY_FRAME {
                    return Err(unexpected(ctx.me, &inner, "relayed"));
                }
                self.handle(ctx, origin, &inner)
            }
            _ => Err(unexpected(ctx.me, env, self.charge.name())),
        }
    }

    fn on_init_nym(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: InitNymRes,
    ) -> Result<(), ActorError> {
        let Some(nonce_ev) = self.pending_nym else {
            return Err(unexpected(ctx.me, env, "not provisioning"));
        };
        let opened = ctx.suite.pk_decrypt(&self.oem_keys.secret, &res.sealed)?;
        let body = InitNymBody::from_bytes(&opened.plaintext)?;
        if opened.sender.as_ref() != Some(&self.steward_keys.enc) || body.steward_did != self.steward_did {
            return Err(ActorError::BadSignature);
        }
        let signed = InitNymBody::signed_part(&body.steward_did, &body.nonce_ev, &body.nonce_st, &body.oem_id);
        if !ctx.suite.verify(&self.steward_keys, &signed, &body.sig) {
            return Err(ActorError::BadSignature);
        }
        if body.nonce_ev != nonce_ev || body.oem_id != self.oem_id {
            return Err(ActorError::NonceMismatch);
        }
        self.pending_nym = None;
        let prov = ctx.suite.gen_did_keys(&mut self.rng);
        let record = DidRecord::new(prov.did.clone(), &prov.public, Role::Client);
        let pop = ctx.suite.sign(&prov.secret, &ProvDidBody::pop_input(&body.nonce_st, &record));
        let out = ProvDidBody { record: record.clone(), nonce_ev, nonce_st: body.nonce_st, pop: Bytes(pop) };
        let sealed =
            ctx.suite.pk_encrypt(&self.steward_keys, Some(&self.oem_keys.secret), &out.to_bytes(), &mut self.rng);
        ctx.running(Label::ProvDid, from, prov_did_ds(&record, &nonce_ev, &body.nonce_st));
        ctx.send(from, &envelope(&RegisterProvisioningDid { sealed: Bytes(sealed) }));
        self.prov = Some(prov);
        Ok(())
    }

    fn on_offer(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: GetCredOfferRes,
    ) -> Result<(), ActorError> {
        let Install::AwaitOffer { emsp, request_nonce } = self.install else {
            return Err(unexpected(ctx.me, env, "no offer pending"));
        };
        if from != emsp {
            return Err(unexpected(ctx.me, env, "offer from another peer"));
        }
        let prov = self.prov.as_ref().ok_or(ActorError::Rejected("no provisioning DID".into()))?;
        let opened = ctx.suite.pk_decrypt(&prov.secret, &res.sealed)?;
        let body = OfferBody::from_bytes(&opened.plaintext)?;
        let emsp_record = ctx.ledger.get_did(&res.emsp_did)?.value;
        if emsp_record.role != Role::Verinym || opened.sender.as_ref() != Some(&emsp_record.enc_pk) {
            return Err(ActorError::AuthFailed);
        }
        if body.request_nonce != request_nonce {
            return Err(ActorError::NonceMismatch);
        }
        let cred_def = ctx.ledger.get_cred_def(&body.offer.cred_def_id)?.value;
        if cred_def.issuer != res.emsp_did || cred_def.schema_id != body.offer.schema_id {
            return Err(ActorError::Rejected("offer does not match the published credential definition".into()));
        }
        let ms = MasterSecret::random(&mut self.rng);
        let (blinded, factor) =
            ctx.suite.blind_master_secret(&cred_def.public_key, &ms, &body.offer.nonce, &mut self.rng);
        let signed = CredRequestBody::<S>::signed_part(&prov.did, &body.offer.nonce, &blinded);
        let req = CredRequestBody::<S> {
            prov_did: prov.did.clone(),
            offer_nonce: body.offer.nonce,
            blinded: blinded.clone(),
            sig: Bytes(ctx.suite.sign(&prov.secret, &signed)),
        };
        let sealed =
            ctx.suite.pk_encrypt(&emsp_record.public_keys(), Some(&prov.secret), &req.to_bytes(), &mut self.rng);
        self.install = Install::AwaitCredential(Box::new(PendingIssue {
            emsp,
            emsp_did: res.emsp_did,
            offer: body.offer,
            cred_def,
            ms,
            factor,
            blinded,
        }));
        self.send_to_emsp(ctx, emsp, &envelope(&CreateContractCredentialReq { sealed: Bytes(sealed) }));
        Ok(())
    }

    fn on_credential(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: CreateContractCredentialRes,
    ) -> Result<(), ActorError> {
        let Install::AwaitCredential(pending) = &self.install else {
            return Err(unexpected(ctx.me, env, "no credential pending"));
        };
        if from != pending.emsp {
            return Err(unexpected(ctx.me, env, "credential from another peer"));
        }
        let prov = self.prov.as_ref().ok_or(ActorError::Rejected("no provisioning DID".into()))?;
        let opened = ctx.suite.pk_decrypt(&prov.secret, &res.sealed)?;
        let emsp_record = ctx.ledger.get_did(&pending.emsp_did)?.value;
        if opened.sender.as_ref() != Some(&emsp_record.enc_pk) {
            return Err(ActorError::AuthFailed);
        }
        let body = CredResponseBody::<S>::from_bytes(&opened.plaintext)?;
        if body.offer_nonce != pending.offer.nonce {
            return Err(ActorError::NonceMismatch);
        }
        let schema = ctx.ledger.get_schema(&pending.cred_def.schema_id)?.value;
        if body.attr_values.len() != schema.attr_names.len()
            || body.attr_values.first() != Some(&pending.cred_def.emsp_id)
        {
            return Err(ActorError::InvalidSignature);
        }
        let attrs: Vec<BigUint> = body.attr_values.iter().map(|v| encode_attribute(v)).collect();
        let pk = &pending.cred_def.public_key;
        let credential = ctx.suite.complete_credential(
            pk,
            &body.pre_credential,
            &pending.factor,
            &pending.ms,
            &attrs,
            &body.rev_index,
        )?;
        let registry = ctx.ledger.get_registry(&body.registry_id)?.value;
        let acc_value = registry.value_at(body.witness.version).ok_or(ActorError::StaleRegistryVersion)?;
        if registry.cred_def_id != pending.cred_def.id
            || !ctx.suite.witness_valid(&registry.params, &body.rev_index, &body.witness.value, acc_value)
        {
            return Err(ActorError::InvalidSignature);
        }
        ctx.commit(
            Label::CredInstall,
            pending.emsp,
            cred_install_ds::<S>(&pending.offer, &pending.blinded, &body.pre_credential),
        );
        self.credentials.push(ContractCredential {
            emsp: pending.emsp,
            emsp_did: pending.emsp_did.clone(),
            cred_def_id: pending.cred_def.id.clone(),
            registry_id: body.registry_id,
            attr_names: schema.attr_names,
            attr_values: body.attr_values,
            credential,
            rev_index: body.rev_index,
            witness: body.witness,
            contract_id: body.contract_id,
            contract_key: body.contract_key,
        });
        self.install = Install::Idle;
        Ok(())
    }

    fn on_discovery(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: ServiceDiscoveryRes,
    ) -> Result<(), ActorError> {
        if self.charge != (Charge::AwaitDiscovery { cp: from }) {
            return Err(unexpected(ctx.me, env, self.charge.name()));
        }
        self.charge = Charge::Idle;
        match AuthMode::parse(&res.mode) {
            Some(m) if self.modes.contains(&m) => match m {
                AuthMode::ContractProof => {
                    let cred = self.credentials.last().ok_or(ActorError::NoCredential("contract proof".into()))?;
                    let req = RequestProofReq { cred_def_id: cred.cred_def_id.clone() };
                    self.charge = Charge::AwaitProofRequest { cp: from };
                    ctx.send(from, &envelope(&req));
                    Ok(())
                }
                AuthMode::PncPki => Err(ActorError::NotImplemented("PnC-PKI identification")),
                AuthMode::ExternalPayment => Err(ActorError::NotImplemented("external payment")),
            },
            _ => Err(ActorError::NoCommonMode),
        }
    }

    fn on_proof_request(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: RequestProofRes,
    ) -> Result<(), ActorError> {
        if self.charge != (Charge::AwaitProofRequest { cp: from }) {
            return Err(unexpected(ctx.me, env, self.charge.name()));
        }
        self.charge = Charge::Idle;
        let req = res.request;
        if !req.requested_reveal.is_subset(&self.disclosable) {
            return Err(ActorError::Rejected("proof request asks for undisclosable attributes".into()));
        }
        let idx = self
            .credentials
            .iter()
            .rposition(|c| c.cred_def_id == req.cred_def_id && c.registry_id == req.registry_id)
            .ok_or_else(|| ActorError::NoCredential(req.cred_def_id.clone()))?;
        let cred_def = ctx.ledger.get_cred_def(&req.cred_def_id)?.value;
        let registry = ctx.ledger.get_registry(&req.registry_id)?.value;
        let acc_value = registry.value_at(req.registry_version).ok_or(ActorError::StaleRegistryVersion)?.clone();
        let cred = &mut self.credentials[idx];
        if cred.witness.version > req.registry_version {
            return Err(ActorError::StaleRegistryVersion);
        }
        let deltas: Vec<_> = registry
            .deltas_since(cred.witness.version)
            .iter()
            .filter(|d| d.version <= req.registry_version)
            .cloned()
            .collect();
        cred.witness =
            ctx.suite.witness_update(&registry.params, &cred.rev_index, &cred.witness, &deltas, &acc_value)?;
        let presentation = ctx.suite.create_presentation(
            &cred_def.public_key,
            &cred.credential,
            &cred.attr_names,
            &cred.attr_values,
            &req,
            &cred.witness,
            &registry.params,
            &acc_value,
            &mut self.rng,
        )?;
        let emsp_keys = ctx.ledger.get_did(&cred.emsp_did)?.value.public_keys();
        let req_bytes = req.to_bytes();
        let auth = make_contract_auth(
            ctx.suite,
            &emsp_keys,
            &cred.contract_key,
            cred.contract_id,
            &req_bytes,
            ctx.now,
            &mut self.rng,
        );
        let msg =
            ValidateContractProofReq::<S> { session_id: res.session_id, presentation, contract_auth: Bytes(auth) };
        ctx.running(Label::ChargeAuth, from, charge_auth_ds::<S>(&req, &msg.presentation));
        ctx.running(Label::Billing, cred.emsp, billing_ds(&req.digest(), &cred.contract_id, ctx.now));
        let mut env = envelope(&msg);
        if self.fixture == Fixture::LeakContractId {
            env = env.with_hint(cred.contract_id.to_string());
        }
        ctx.send(from, &env);
        self.charge = Charge::AwaitValidation { cp: from, session_id: res.session_id };
        Ok(())
    }

    fn on_validation(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        res: ValidateContractProofRes,
    ) -> Result<(), ActorError> {
        if self.charge != (Charge::AwaitValidation { cp: from, session_id: res.session_id }) {
            return Err(unexpected(ctx.me, env, self.charge.name()));
        }
        self.charge = Charge::Idle;
        if res.status == STATUS_AUTHORIZED {
            self.authorized_sessions += 1;
            Ok(())
        } else {
            Err(ActorError::Rejected(format!("charge point answered {}", res.status)))
        }
    }
}

pub(crate) fn charge_auth_ds<S: CryptoSuite>(req: &ProofRequest, pres: &S::Presentation) -> Vec<u8> {
    digest_concat(&[&req.to_bytes(), &pres.to_bytes()])
}
