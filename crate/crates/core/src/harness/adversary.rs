use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::Packet;
use crate::actors::messages::*;
use crate::actors::{ActorError, Addr, Ctx, EvWallet};
use crate::codec::{tags, Bytes, Envelope, Wire};
use crate::crypto::{ContractKey, CryptoSuite, DidKeys, Drbg};
use crate::ledger::{DidRecord, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdversaryMode {
    /// Honest-but-curious: observes every packet, changes nothing.
    #[default]
    Passive,
    /// Controls the network but holds no private keys.
    DolevYao,
    /// Passive network plus the long-term keys of the revealed actors.
    KeyReveal,
}

impl AdversaryMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "passive" => Some(Self::Passive),
            "dolev-yao" | "dolev_yao" | "dolevyao" => Some(Self::DolevYao),
            "key-reveal" | "key_reveal" | "keyreveal" => Some(Self::KeyReveal),
            _ => None,
        }
    }
}

/// Network actions available to a Dolev-Yao adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DyAction {
    Drop,
    Replay,
    Reorder,
    Inject,
    Modify,
}

impl DyAction {
    pub const ALL: [DyAction; 5] =
        [DyAction::Drop, DyAction::Replay, DyAction::Reorder, DyAction::Inject, DyAction::Modify];

    pub fn as_str(self) -> &'static str {
        match self {
            DyAction::Drop => "drop",
            DyAction::Replay => "replay",
            DyAction::Reorder => "reorder",
            DyAction::Inject => "inject",
            DyAction::Modify => "modify",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone)]
pub struct AdversaryPolicy {
    pub mode: AdversaryMode,
    /// Probability that a packet is tampered with (Dolev-Yao only).
    pub rate: f64,
    pub actions: BTreeSet<DyAction>,
    /// Actors whose long-term keys are handed to the adversary at start.
    pub reveal: BTreeSet<Addr>,
}

impl Default for AdversaryPolicy {
    fn default() -> Self {
        Self { mode: AdversaryMode::Passive, rate: 0.0, actions: DyAction::ALL.into(), reveal: BTreeSet::new() }
    }
}

impl AdversaryPolicy {
    pub fn dolev_yao(rate: f64) -> Self {
        Self { mode: AdversaryMode::DolevYao, rate, ..Self::default() }
    }

    pub fn key_reveal(actors: impl IntoIterator<Item = Addr>) -> Self {
        Self { mode: AdversaryMode::KeyReveal, reveal: actors.into_iter().collect(), ..Self::default() }
    }
}

pub(crate) enum Decision {
    Deliver,
    Drop,
    Replay,
    Reorder,
    /// Deliver the packet, then also send an earlier one elsewhere.
    Inject(Packet),
    Modify(Vec<u8>),
}

/// Keys obtained through reveals.
#[derive(Default)]
pub struct Loot {
    pub psks: BTreeMap<String, ContractKey>,
    pub keys: BTreeMap<Addr, DidKeys>,
    pub prov: BTreeMap<Addr, DidKeys>,
}

struct Forgery {
    emsp_name: String,
    keys: DidKeys,
}

pub struct Adversary<S: CryptoSuite> {
    pub policy: AdversaryPolicy,
    rng: Drbg,
    history: Vec<Packet>,
    pub loot: Loot,
    steward: DidRecord,
    forgery: Option<Forgery>,
    /// Verinyms written through a forged onboarding.
    pub forged_verinyms: Vec<DidRecord>,
    /// Wallet used to run flows with stolen keys.
    pub shadow: Option<EvWallet<S>>,
}

impl<S: CryptoSuite> Adversary<S> {
    pub fn new(policy: AdversaryPolicy, rng: Drbg, steward: &DidRecord) -> Self {
        Self {
            policy,
            rng,
            history: Vec::new(),
            loot: Loot::default(),
            steward: steward.clone(),
            forgery: None,
            forged_verinyms: Vec::new(),
            shadow: None,
        }
    }

    /// Chooses what happens to a packet in transit.
    pub(crate) fn decide(&mut self, p: &Packet, addrs: &[Addr]) -> Decision {
        self.history.push(p.clone());
        if self.policy.mode != AdversaryMode::DolevYao || self.policy.actions.is_empty() {
            return Decision::Deliver;
        }
        if !self.rng.gen_bool(self.policy.rate.clamp(0.0, 1.0)) {
            return Decision::Deliver;
        }
        let actions: Vec<DyAction> = self.policy.actions.iter().copied().collect();
        match actions[self.rng.gen_range(0..actions.len())] {
            DyAction::Drop => Decision::Drop,
            DyAction::Replay => Decision::Replay,
            DyAction::Reorder => Decision::Reorder,
            DyAction::Inject => {
                let old = self.history[self.rng.gen_range(0..self.history.len())].clone();
                let targets: Vec<Addr> = addrs.iter().copied().filter(|a| *a != old.to).collect();
                let to = if targets.is_empty() { old.to } else { targets[self.rng.gen_range(0..targets.len())] };
                Decision::Inject(Packet { to, ..old })
            }
            DyAction::Modify => {
                let mut bytes = p.bytes.clone();
                if !bytes.is_empty() {
                    let i = self.rng.gen_range(0..bytes.len());
                    bytes[i] ^= 1 << self.rng.gen_range(0..8);
                }
                Decision::Modify(bytes)
            }
        }
    }

    pub(crate) fn start_forge_verinym(&mut self, ctx: &mut Ctx<'_, S>, emsp_name: &str) {
        let keys = ctx.suite.gen_did_keys(&mut self.rng);
        let req = VerinymChallengeReq { emsp_name: emsp_name.to_string(), did: keys.did.clone() };
        self.forgery = Some(Forgery { emsp_name: emsp_name.to_string(), keys });
        ctx.send(Addr::Steward, &envelope(&req));
    }

    pub(crate) fn start_steal_install(
        &mut self,
        ctx: &mut Ctx<'_, S>,
        prov: DidKeys,
        emsp: Addr,
    ) -> Result<(), ActorError> {
        let dummy = ctx.suite.gen_did_keys(&mut self.rng);
        let rng = crate::crypto::drbg(self.rng.gen(), "shadow");
        let mut wallet = EvWallet::new(Addr::Adversary, "stolen", dummy, &self.steward, rng);
        wallet.prov = Some(prov);
        let r = wallet.start_install(ctx, emsp);
        self.shadow = Some(wallet);
        r
    }

    pub(crate) fn handle(&mut self, ctx: &mut Ctx<'_, S>, from: Addr, env: &Envelope) -> Result<(), ActorError> {
        match env.msg_type {
            tags::VERINYM_CHALLENGE_RES => {
                let res: VerinymChallengeRes = open_envelope(env)?;
                let forgery = self.forgery.as_ref().ok_or(ActorError::Rejected("no forgery under way".into()))?;
                let psk = self.loot.psks.get(&forgery.emsp_name).ok_or(ActorError::AuthFailed)?;
                let record = DidRecord::new(forgery.keys.did.clone(), &forgery.keys.public, Role::Verinym);
                let pop_input = (res.nonce, record.clone()).to_bytes();
                let body = VerinymBody {
                    emsp_name: forgery.emsp_name.clone(),
                    record,
                    nonce: res.nonce,
                    pop: Bytes(ctx.suite.sign(&forgery.keys.secret, &pop_input)),
                };
                let mac = ctx.suite.hmac_tag(psk, &body.to_bytes());
                ctx.send(from, &envelope(&WriteVerinymReq { body, mac: Bytes(mac) }));
                Ok(())
            }
            tags::WRITE_VERINYM_RES => {
                let res: WriteVerinymRes = open_envelope(env)?;
                let forgery = self.forgery.take().ok_or(ActorError::Rejected("no forgery under way".into()))?;
                if res.did == forgery.keys.did {
                    self.forged_verinyms.push(DidRecord::new(forgery.keys.did, &forgery.keys.public, Role::Verinym));
                }
                Ok(())
            }
            _ => match self.shadow.as_mut() {
                Some(w) => w.handle(ctx, from, env),
                None => Ok(()),
            },
        }
    }
}
