use std::collections::{BTreeMap, BTreeSet};

use super::ev::charge_auth_ds;
use super::messages::*;
use super::{unexpected, ActorError, Addr, Ctx, Label};
use crate::codec::{tags, Bytes, Envelope};
use crate::crypto::{random_array, CryptoSuite, Drbg, PresentationView, ProofRequest};
use crate::ledger::EMSP_ID_ATTR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStatus {
    AwaitProof,
    Authorized,
    Rejected(String),
    Billed,
    BillingRejected(String),
}

#[derive(Debug, Clone)]
pub struct CpSession {
    pub ev: Addr,
    pub request: ProofRequest,
    pub status: SessionStatus,
    pub started: u64,
}

/// Charge point. Verifies contract proofs against the ledger and forwards
/// billing data to its operator.
pub struct Cp {
    pub addr: Addr,
    pub cp_id: String,
    pub location: String,
    pub cpo: Addr,
    pub modes: BTreeSet<AuthMode>,
    rng: Drbg,
    pub sessions: BTreeMap<[u8; 16], CpSession>,
    relay_back: BTreeMap<Addr, Addr>,
}

impl Cp {
    pub fn new(addr: Addr, cp_id: &str, location: &str, cpo: Addr, rng: Drbg) -> Self {
        Self {
            addr,
            cp_id: cp_id.to_string(),
            location: location.to_string(),
            cpo,
            modes: [AuthMode::ExternalPayment, AuthMode::PncPki, AuthMode::ContractProof].into(),
            rng,
            sessions: BTreeMap::new(),
            relay_back: BTreeMap::new(),
        }
    }

    pub fn handle<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
    ) -> Result<(), ActorError> {
        match env.msg_type {
            tags::SERVICE_DISCOVERY_REQ => self.on_discovery(ctx, from, open_envelope(env)?),
            tags::REQUEST_PROOF_REQ => self.on_request_proof(ctx, from, open_envelope(env)?),
            tags::VALIDATE_CONTRACT_PROOF_REQ => self.on_validate(ctx, from, env, open_envelope(env)?),
            tags::BILLING_ACK => self.on_billing_ack(ctx, from, env, open_envelope(env)?),
            tags::RELAY_FRAME => {
                let frame: RelayFrame = open_envelope(env)?;
                let target: Addr = frame.target.parse().map_err(ActorError::Rejected)?;
                if !matches!(target, Addr::Emsp(_)) || !matches!(from, Addr::Ev(_)) {
                    return Err(ActorError::Rejected(format!("will not relay from {from} to {target}")));
                }
                self.relay_back.insert(target, from);
                ctx.send_raw(target, frame.inner.0);
                Ok(())
            }
            tags::GET_CRED_OFFER_RES | tags::CREATE_CONTRACT_CREDENTIAL_RES => {
                let ev = *self.relay_back.get(&from).ok_or_else(|| unexpected(ctx.me, env, "no relay open"))?;
                let inner = env.encode()?;
                ctx.send(ev, &envelope(&RelayFrame { target: from.to_string(), inner: Bytes(inner) }));
                Ok(())
            }
            _ => Err(unexpected(ctx.me, env, "ready")),
        }
    }

    fn on_discovery<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: ServiceDiscoveryReq,
    ) -> Result<(), ActorError> {
        let theirs: BTreeSet<AuthMode> = req.modes.iter().filter_map(|m| AuthMode::parse(m)).collect();
        let mode = AuthMode::negotiate(&self.modes, &theirs);
        let res =
            ServiceDiscoveryRes { cp_id: self.cp_id.clone(), mode: mode.map_or("none", |m| m.as_str()).to_string() };
        ctx.send(from, &envelope(&res));
        mode.map(|_| ()).ok_or(ActorError::NoCommonMode)
    }

    fn on_request_proof<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: RequestProofReq,
    ) -> Result<(), ActorError> {
        if !self.modes.contains(&AuthMode::ContractProof) {
            return Err(ActorError::NoCommonMode);
        }
        ctx.ledger.get_cred_def(&req.cred_def_id)?;
        let registry_id = ctx
            .ledger
            .registry_for_cred_def(&req.cred_def_id)
            .ok_or_else(|| ActorError::NoCredential(req.cred_def_id.clone()))?;
        let registry = ctx.ledger.get_registry(&registry_id)?.value;
        let request = ProofRequest {
            nonce: random_array(&mut self.rng),
            requested_reveal: [EMSP_ID_ATTR.to_string()].into(),
            cred_def_id: req.cred_def_id,
            registry_id,
            registry_version: registry.version(),
        };
        let session_id: [u8; 16] = random_array(&mut self.rng);
        self.sessions.insert(
            session_id,
            CpSession { ev: from, request: request.clone(), status: SessionStatus::AwaitProof, started: ctx.now },
        );
        ctx.send(from, &envelope(&RequestProofRes { session_id, request }));
        Ok(())
    }

    fn on_validate<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        msg: ValidateContractProofReq<S>,
    ) -> Result<(), ActorError> {
        let session = match self.sessions.get_mut(&msg.session_id) {
            Some(s) if s.ev == from && s.status == SessionStatus::AwaitProof => s,
            _ => return Err(unexpected(ctx.me, env, "no open session")),
        };
        let req = session.request.clone();
        let outcome = verify_contract_proof(ctx, &req, &msg.presentation);
        let status = match &outcome {
            Ok(_) => STATUS_AUTHORIZED.to_string(),
            Err(e) => e.name().to_string(),
        };
        ctx.send(from, &envelope(&ValidateContractProofRes { session_id: msg.session_id, status }));
        let emsp_id = match outcome {
            Ok(id) => id,
            Err(e) => {
                session.status = SessionStatus::Rejected(e.name().to_string());
                return Err(e);
            }
        };
        session.status = SessionStatus::Authorized;
        ctx.commit(Label::ChargeAuth, from, charge_auth_ds::<S>(&req, &msg.presentation));
        let fwd = BillingForwardReq {
            session_id: msg.session_id,
            meter_wh: 1_000 + self.rng_u64() % 60_000,
            request_hash: req.digest(),
            emsp_id,
            location: Some(self.location.clone()),
            contract_auth: msg.contract_auth,
        };
        ctx.send(self.cpo, &envelope(&fwd));
        Ok(())
    }

    fn on_billing_ack<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
        ack: BillingAck,
    ) -> Result<(), ActorError> {
        let session = match self.sessions.get_mut(&ack.session_id) {
            Some(s) if from == self.cpo && s.status == SessionStatus::Authorized => s,
            _ => return Err(unexpected(ctx.me, env, "no billed session")),
        };
        session.status = if ack.accepted { SessionStatus::Billed } else { SessionStatus::BillingRejected(ack.reason) };
        Ok(())
    }

    fn rng_u64(&mut self) -> u64 {
        u64::from_be_bytes(random_array(&mut self.rng))
    }
}

/// Checks a presentation against the request and returns the disclosed
/// EMSP id.
fn verify_contract_proof<S: CryptoSuite>(
    ctx: &Ctx<'_, S>,
    req: &ProofRequest,
    pres: &S::Presentation,
) -> Result<String, ActorError> {
    let cred_def = ctx.ledger.get_cred_def(&req.cred_def_id)?.value;
    let schema = ctx.ledger.get_schema(&cred_def.schema_id)?.value;
    let registry = ctx.ledger.get_registry(&req.registry_id)?.value;
    if registry.cred_def_id != cred_def.id {
        return Err(ActorError::ProofInvalid);
    }
    let acc_value = registry.value_at(req.registry_version).ok_or(ActorError::StaleRegistryVersion)?;
    if !ctx.suite.verify_presentation(&cred_def.public_key, &schema.attr_names, pres, req, &registry.params, acc_value)
    {
        return Err(ActorError::ProofInvalid);
    }
    let revealed = pres.revealed();
    match revealed.get(EMSP_ID_ATTR) {
        Some(id) if *id == cred_def.emsp_id && revealed.len() == req.requested_reveal.len() => Ok(id.clone()),
        _ => Err(ActorError::ProofInvalid),
    }
}
