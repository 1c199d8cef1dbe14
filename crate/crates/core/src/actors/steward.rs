use std::collections::{BTreeMap, BTreeSet};

use super::messages::*;
use super::{unexpected, ActorError, Addr, Ctx, Label};
use crate::codec::{tags, Bytes, Envelope, Wire};
use crate::crypto::{random_array, ContractKey, CryptoSuite, DidKeys, DidPublicKeys, Drbg};
use crate::ledger::{DidRecord, Role};

#[derive(Debug, Clone)]
struct VerinymChallenge {
    emsp_name: String,
    did: crate::crypto::Did,
}

#[derive(Debug, Clone)]
struct NymSession {
    nonce_ev: [u8; 16],
    oem_id: String,
}

/// First-level ledger writer. Onboards EMSP verinyms over a pre-shared-key
/// channel and registers provisioning DIDs on behalf of OEMs.
pub struct Steward {
    pub keys: DidKeys,
    rng: Drbg,
    psks: BTreeMap<String, ContractKey>,
    oems: BTreeMap<String, DidPublicKeys>,
    challenges: BTreeMap<[u8; 16], VerinymChallenge>,
    used_challenges: BTreeSet<[u8; 16]>,
    nym_sessions: BTreeMap<[u8; 16], NymSession>,
    used_nym_nonces: BTreeSet<[u8; 16]>,
}

impl Steward {
    pub fn new(keys: DidKeys, rng: Drbg) -> Self {
        Self {
            keys,
            rng,
            psks: BTreeMap::new(),
            oems: BTreeMap::new(),
            challenges: BTreeMap::new(),
            used_challenges: BTreeSet::new(),
            nym_sessions: BTreeMap::new(),
            used_nym_nonces: BTreeSet::new(),
        }
    }

    pub fn record(&self) -> DidRecord {
        DidRecord::new(self.keys.did.clone(), &self.keys.public, Role::Steward)
    }

    /// Registers the key agreed with an EMSP out of band.
    pub fn add_psk(&mut self, emsp_name: &str, key: ContractKey) {
        self.psks.insert(emsp_name.to_string(), key);
    }

    /// Registers an OEM trust anchor.
    pub fn add_oem(&mut self, oem_id: &str, keys: DidPublicKeys) {
        self.oems.insert(oem_id.to_string(), keys);
    }

    pub fn handle<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        env: &Envelope,
    ) -> Result<(), ActorError> {
        match env.msg_type {
            tags::VERINYM_CHALLENGE_REQ => self.on_challenge(ctx, from, open_envelope(env)?),
            tags::WRITE_VERINYM_REQ => self.on_write_verinym(ctx, from, open_envelope(env)?),
            tags::INIT_NYM_REQ => self.on_init_nym(ctx, from, open_envelope(env)?),
            tags::REGISTER_PROVISIONING_DID => self.on_register(ctx, open_envelope(env)?),
            _ => Err(unexpected(ctx.me, env, "ready")),
        }
    }

    fn on_challenge<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: VerinymChallengeReq,
    ) -> Result<(), ActorError> {
        if !self.psks.contains_key(&req.emsp_name) {
            return Err(ActorError::AuthFailed);
        }
        let nonce: [u8; 16] = random_array(&mut self.rng);
        self.challenges.insert(nonce, VerinymChallenge { emsp_name: req.emsp_name, did: req.did });
        ctx.send(from, &envelope(&VerinymChallengeRes { nonce }));
        Ok(())
    }

    fn on_write_verinym<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: WriteVerinymReq,
    ) -> Result<(), ActorError> {
        let body = req.body;
        let psk = self.psks.get(&body.emsp_name).ok_or(ActorError::AuthFailed)?;
        if !ctx.suite.hmac_verify(psk, &body.to_bytes(), &req.mac) {
            return Err(ActorError::AuthFailed);
        }
        if self.used_challenges.contains(&body.nonce) {
            return Err(ActorError::Replayed);
        }
        let challenge = self.challenges.get(&body.nonce).ok_or(ActorError::NonceMismatch)?;
        if challenge.emsp_name != body.emsp_name || challenge.did != body.record.did {
            return Err(ActorError::NonceMismatch);
        }
        let pop_msg = verinym_pop_input(&body.nonce, &body.record);
        if body.record.role != Role::Verinym || !ctx.suite.verify(&body.record.public_keys(), &pop_msg, &body.pop) {
            return Err(ActorError::PopFailed);
        }
        self.challenges.remove(&body.nonce);
        self.used_challenges.insert(body.nonce);
        let version = ctx.ledger.write_did(&self.keys.did, body.record.clone())?;
        ctx.commit(Label::StewardVerinym, &body.emsp_name, body.record.to_bytes());
        let mac = ctx.suite.hmac_tag(psk, &WriteVerinymRes::mac_input(&body.record.did, version, &body.nonce));
        let res = WriteVerinymRes { did: body.record.did, ledger_version: version, nonce: body.nonce, mac: Bytes(mac) };
        ctx.send(from, &envelope(&res));
        Ok(())
    }

    fn on_init_nym<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        from: Addr,
        req: InitNymReq,
    ) -> Result<(), ActorError> {
        let oem = self.oems.get(&req.oem_id).ok_or(ActorError::AuthFailed)?;
        let nonce_st: [u8; 16] = random_array(&mut self.rng);
        let signed = InitNymBody::signed_part(&self.keys.did, &req.nonce_ev, &nonce_st, &req.oem_id);
        let body = InitNymBody {
            steward_did: self.keys.did.clone(),
            nonce_ev: req.nonce_ev,
            nonce_st,
            oem_id: req.oem_id.clone(),
            sig: Bytes(ctx.suite.sign(&self.keys.secret, &signed)),
        };
        let sealed = ctx.suite.pk_encrypt(oem, Some(&self.keys.secret), &body.to_bytes(), &mut self.rng);
        self.nym_sessions.insert(nonce_st, NymSession { nonce_ev: req.nonce_ev, oem_id: req.oem_id });
        ctx.send(from, &envelope(&InitNymRes { sealed: Bytes(sealed) }));
        Ok(())
    }

    fn on_register<S: CryptoSuite>(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        msg: RegisterProvisioningDid,
    ) -> Result<(), ActorError> {
        let opened = ctx.suite.pk_decrypt(&self.keys.secret, &msg.sealed)?;
        let body = ProvDidBody::from_bytes(&opened.plaintext)?;
        if self.used_nym_nonces.contains(&body.nonce_st) {
            return Err(ActorError::Replayed);
        }
        let session = self.nym_sessions.get(&body.nonce_st).ok_or(ActorError::NonceMismatch)?;
        if session.nonce_ev != body.nonce_ev {
            return Err(ActorError::NonceMismatch);
        }
        let oem = self.oems.get(&session.oem_id).ok_or(ActorError::AuthFailed)?;
        if opened.sender.as_ref() != Some(&oem.enc) {
            return Err(ActorError::AuthFailed);
        }
        let record = &body.record;
        let pop_ok = record.role == Role::Client
            && record.is_self_certifying()
            && ctx.suite.verify(&record.public_keys(), &ProvDidBody::pop_input(&body.nonce_st, record), &body.pop);
        if !pop_ok {
            return Err(ActorError::PopFailed);
        }
        let oem_id = session.oem_id.clone();
        self.nym_sessions.remove(&body.nonce_st);
        self.used_nym_nonces.insert(body.nonce_st);
        ctx.ledger.write_did(&self.keys.did, record.clone())?;
        ctx.commit(Label::ProvDid, oem_id, prov_did_ds(record, &body.nonce_ev, &body.nonce_st));
        Ok(())
    }
}

pub(crate) fn verinym_pop_input(nonce: &[u8; 16], record: &DidRecord) -> Vec<u8> {
    (*nonce, record.clone()).to_bytes()
}

pub(crate) fn prov_did_ds(record: &DidRecord, nonce_ev: &[u8; 16], nonce_st: &[u8; 16]) -> Vec<u8> {
    let mut ds = record.to_bytes();
    ds.extend_from_slice(nonce_ev);
    ds.extend_from_slice(nonce_st);
    ds
}
