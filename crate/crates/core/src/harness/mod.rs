//! Deterministic in-process network simulation.
//!
//! A [`World`] owns every actor, the ledger, a FIFO message bus and an
//! [`Adversary`] that sees every packet before delivery. Flows are started
//! with plain method calls and then run to quiescence. Handler errors are
//! captured as [`Failure`]s rather than aborting the run, so scenarios can
//! assert on them. The logical clock only moves when told to.

mod adversary;
pub mod bench;
mod checks;
pub mod demo;
mod scenario;
pub mod unlink;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

use thiserror::Error;

use crate::actors::{
    ActorError, Addr, ContractCredential, Cp, Cpo, Ctx, Emitted, Emsp, EvWallet, Label, Steward, TraceEvent, TraceKind,
};
use crate::codec::{tags, Bytes, Envelope, Wire};
use crate::crypto::{drbg, ContractId, ContractKey, CryptoSuite, Did};
use crate::ledger::{Ledger, LedgerError};
use crate::wire_record;

use adversary::Decision;
pub use adversary::{Adversary, AdversaryMode, AdversaryPolicy, DyAction, Loot};
pub use checks::{check_all_agreement, check_injective_agreement, check_wallet_secrecy, AgreementReport, SecrecyLeak};
pub use scenario::{apply_step, run_scenario, Assertion, AssertionResult, Backend, Scenario, ScenarioRun, Step};

/// Start of the logical clock (seconds since the Unix epoch).
pub const EPOCH: u64 = 1_700_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("script error: {0}")]
    Script(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
}

fn script(msg: impl Into<String>) -> HarnessError {
    HarnessError::Script(msg.into())
}

/// One delivery attempt as seen on the bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageLogEntry {
    pub seq: u64,
    pub time: u64,
    pub from: Addr,
    pub to: Addr,
    pub msg_type: String,
    pub bytes: Bytes,
    /// Adversary action applied: deliver, drop, replay, reorder, inject or modify.
    pub action: String,
    pub error: Option<String>,
}

wire_record!(MessageLogEntry = tags::MESSAGE_LOG_ENTRY; { seq, time, from, to, msg_type, bytes, action, error });

/// A handler error captured during a run.
#[derive(Debug, Clone)]
pub struct Failure {
    pub seq: u64,
    pub actor: Addr,
    pub message: Option<String>,
    pub error: ActorError,
}

#[derive(Debug, Clone)]
pub(crate) struct Packet {
    pub from: Addr,
    pub to: Addr,
    pub bytes: Vec<u8>,
    /// Wall time of the handler that produced the packet.
    pub cost_ms: f64,
    /// Set once the adversary has acted on the packet.
    pub origin: Option<&'static str>,
}

/// Actor population and adversary of a world.
#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub seed: u64,
    pub modulus_bits: u64,
    pub emsps: u16,
    pub evs: u16,
    pub cps: u16,
    pub cpos: u16,
    pub offline_evs: BTreeSet<u16>,
    pub adversary: AdversaryPolicy,
    pub step_limit: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            modulus_bits: 512,
            emsps: 1,
            evs: 1,
            cps: 1,
            cpos: 1,
            offline_evs: BTreeSet::new(),
            adversary: AdversaryPolicy::default(),
            step_limit: 10_000,
        }
    }
}

enum ActorMut<'a, S: CryptoSuite> {
    Steward(&'a mut Steward),
    Emsp(&'a mut Emsp<S>),
    Ev(&'a mut EvWallet<S>),
    Cp(&'a mut Cp),
    Cpo(&'a mut Cpo),
    Adversary(&'a mut Adversary<S>),
}

impl<S: CryptoSuite> ActorMut<'_, S> {
    fn handle(self, ctx: &mut Ctx<'_, S>, from: Addr, env: &Envelope) -> Result<(), ActorError> {
        match self {
            ActorMut::Steward(a) => a.handle(ctx, from, env),
            ActorMut::Emsp(a) => a.handle(ctx, from, env),
            ActorMut::Ev(a) => a.handle(ctx, from, env),
            ActorMut::Cp(a) => a.handle(ctx, from, env),
            ActorMut::Cpo(a) => a.handle(ctx, from, env),
            ActorMut::Adversary(a) => a.handle(ctx, from, env),
        }
    }
}

/// The simulated network and everything attached to it.
pub struct World<S: CryptoSuite> {
    pub suite: S,
    pub config: WorldConfig,
    pub ledger: Ledger<S>,
    pub steward: Steward,
    pub emsps: Vec<Emsp<S>>,
    pub evs: Vec<EvWallet<S>>,
    pub cps: Vec<Cp>,
    pub cpos: Vec<Cpo>,
    pub adversary: Adversary<S>,
    pub directory: BTreeMap<Did, Addr>,
    pub now: u64,
    bus: VecDeque<Packet>,
    seq: u64,
    steps: usize,
    pub trace: Vec<TraceEvent>,
    pub log: Vec<MessageLogEntry>,
    /// Producer wall time per log entry, in milliseconds.
    pub costs: Vec<f64>,
    pub failures: Vec<Failure>,
    /// Set when a run hit the step limit.
    pub truncated: bool,
}

impl<S: CryptoSuite> World<S> {
    pub fn new(suite: S, config: WorldConfig) -> Result<Self, HarnessError> {
        let seed = config.seed;
        let steward_keys = suite.gen_did_keys(&mut drbg(seed, "keys/steward"));
        let steward = Steward::new(steward_keys, drbg(seed, "steward"));
        let steward_record = steward.record();
        let ledger = Ledger::genesis(vec![steward_record.clone()])?;
        let mut world = Self {
            adversary: Adversary::new(config.adversary.clone(), drbg(seed, "adversary"), &steward_record),
            suite,
            ledger,
            steward,
            emsps: Vec::new(),
            evs: Vec::new(),
            cps: Vec::new(),
            cpos: Vec::new(),
            directory: BTreeMap::new(),
            now: EPOCH,
            bus: VecDeque::new(),
            seq: 0,
            steps: 0,
            trace: Vec::new(),
            log: Vec::new(),
            costs: Vec::new(),
            failures: Vec::new(),
            truncated: false,
            config: config.clone(),
        };
        for i in 0..config.emsps {
            let addr = Addr::Emsp(i);
            let keys = world.suite.gen_did_keys(&mut drbg(seed, &format!("keys/{addr}")));
            let psk = ContractKey(crate::crypto::random_array(&mut drbg(seed, &format!("psk/{addr}"))));
            world.steward.add_psk(&addr.to_string(), psk.clone());
            world.directory.insert(keys.did.clone(), addr);
            let emsp_id = format!("DE-EM{i:03}");
            world.emsps.push(Emsp::new(addr, &emsp_id, keys, psk, drbg(seed, &addr.to_string())));
        }
        let oem_id = "OEM-1";
        let oem_keys = world.suite.gen_did_keys(&mut drbg(seed, "keys/oem"));
        world.steward.add_oem(oem_id, oem_keys.public.clone());
        for i in 0..config.evs {
            let addr = Addr::Ev(i);
            let mut ev = EvWallet::new(addr, oem_id, oem_keys.clone(), &steward_record, drbg(seed, &addr.to_string()));
            if config.offline_evs.contains(&i) {
                if config.cps == 0 {
                    return Err(HarnessError::Setup("offline EVs need a charge point to relay through".into()));
                }
                ev.relay_via = Some(Addr::Cp(i % config.cps));
            }
            world.evs.push(ev);
        }
        for i in 0..config.cpos {
            world.cpos.push(Cpo::new(Addr::Cpo(i)));
        }
        for i in 0..config.cps {
            if config.cpos == 0 {
                return Err(HarnessError::Setup("charge points need an operator".into()));
            }
            let addr = Addr::Cp(i);
            let cpo = Addr::Cpo(i % config.cpos);
            world.cps.push(Cp::new(
                addr,
                &format!("CP{i:03}"),
                &format!("site-{i}"),
                cpo,
                drbg(seed, &addr.to_string()),
            ));
        }
        for addr in config.adversary.reveal.clone() {
            world.reveal(addr)?;
        }
        Ok(world)
    }

    /// All actor addresses, in a fixed order.
    pub fn addrs(&self) -> Vec<Addr> {
        let mut out = vec![Addr::Steward];
        out.extend(self.emsps.iter().map(|a| a.addr));
        out.extend(self.evs.iter().map(|a| a.addr));
        out.extend(self.cps.iter().map(|a| a.addr));
        out.extend(self.cpos.iter().map(|a| a.addr));
        out
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Runs `f` against actor `me` with a fresh context, then collects its
    /// outbox and emitted events.
    fn act<R>(&mut self, me: Addr, f: impl FnOnce(ActorMut<'_, S>, &mut Ctx<'_, S>) -> R) -> Result<R, HarnessError> {
        let start = Instant::now();
        let mut ctx = Ctx::new(&self.suite, &self.ledger, &self.directory, self.now, me);
        let actor = match me {
            Addr::Steward => ActorMut::Steward(&mut self.steward),
            Addr::Emsp(i) => {
                ActorMut::Emsp(self.emsps.get_mut(i as usize).ok_or_else(|| script(format!("no actor {me}")))?)
            }
            Addr::Ev(i) => ActorMut::Ev(self.evs.get_mut(i as usize).ok_or_else(|| script(format!("no actor {me}")))?),
            Addr::Cp(i) => ActorMut::Cp(self.cps.get_mut(i as usize).ok_or_else(|| script(format!("no actor {me}")))?),
            Addr::Cpo(i) => {
                ActorMut::Cpo(self.cpos.get_mut(i as usize).ok_or_else(|| script(format!("no actor {me}")))?)
            }
            Addr::Adversary => ActorMut::Adversary(&mut self.adversary),
        };
        let r = f(actor, &mut ctx);
        let cost_ms = start.elapsed().as_secs_f64() * 1e3;
        let Ctx { outbox, emitted, .. } = ctx;
        let origin = (me == Addr::Adversary).then_some("inject");
        for (to, bytes) in outbox {
            self.bus.push_back(Packet { from: me, to, bytes, cost_ms, origin });
        }
        if me != Addr::Adversary {
            for e in emitted {
                self.record(me, e);
            }
        }
        Ok(r)
    }

    fn record(&mut self, me: Addr, e: Emitted) {
        let seq = self.next_seq();
        self.trace.push(TraceEvent {
            seq,
            time: self.now,
            kind: e.kind,
            actor: me.to_string(),
            peer: e.peer,
            label: e.label,
            ds: Bytes(e.ds),
        });
    }

    fn fail(&mut self, actor: Addr, message: Option<String>, error: ActorError) {
        let seq = self.seq;
        self.failures.push(Failure { seq, actor, message, error });
    }

    /// Runs a flow start on one actor and records a returned error.
    fn kick(
        &mut self,
        me: Addr,
        f: impl FnOnce(ActorMut<'_, S>, &mut Ctx<'_, S>) -> Result<(), ActorError>,
    ) -> Result<(), HarnessError> {
        if let Err(e) = self.act(me, f)? {
            self.fail(me, None, e);
        }
        Ok(())
    }

    /// Marks an actor's long-term keys as leaked and hands them to the
    /// adversary.
    pub fn reveal(&mut self, addr: Addr) -> Result<(), HarnessError> {
        match addr {
            Addr::Emsp(i) => {
                let e = self.emsps.get(i as usize).ok_or_else(|| script(format!("no actor {addr}")))?;
                self.adversary.loot.psks.insert(addr.to_string(), e.psk.clone());
                self.adversary.loot.keys.insert(addr, e.keys.clone());
            }
            Addr::Ev(i) => {
                let ev = self.evs.get(i as usize).ok_or_else(|| script(format!("no actor {addr}")))?;
                self.adversary.loot.keys.insert(addr, ev.oem_keys.clone());
                if let Some(p) = &ev.prov {
                    self.adversary.loot.prov.insert(addr, p.clone());
                }
            }
            Addr::Steward => {
                self.adversary.loot.keys.insert(addr, self.steward.keys.clone());
            }
            Addr::Cp(_) | Addr::Cpo(_) | Addr::Adversary => {}
        }
        let seq = self.next_seq();
        self.trace.push(TraceEvent {
            seq,
            time: self.now,
            kind: TraceKind::Reveal,
            actor: addr.to_string(),
            peer: String::new(),
            label: Label::StewardVerinym,
            ds: Bytes::default(),
        });
        Ok(())
    }

    /// Delivers packets until the bus is empty or the step limit is hit.
    pub fn run(&mut self) -> Result<(), HarnessError> {
        while let Some(p) = self.bus.pop_front() {
            self.steps += 1;
            if self.steps > self.config.step_limit {
                self.truncated = true;
                self.bus.clear();
                break;
            }
            if p.origin.is_some() || p.to == Addr::Adversary {
                let action = p.origin.unwrap_or("deliver");
                self.deliver(p, action)?;
                continue;
            }
            let addrs = self.addrs();
            match self.adversary.decide(&p, &addrs) {
                Decision::Deliver => self.deliver(p, "deliver")?,
                Decision::Drop => {
                    self.log_packet(&p, "drop", None);
                }
                Decision::Replay => {
                    let copy = Packet { origin: Some("replay"), ..p.clone() };
                    self.deliver(p, "deliver")?;
                    self.bus.push_back(copy);
                }
                Decision::Reorder => {
                    self.bus.push_back(Packet { origin: Some("reorder"), ..p });
                }
                Decision::Inject(old) => {
                    self.deliver(p, "deliver")?;
                    self.bus.push_back(Packet { origin: Some("inject"), ..old });
                }
                Decision::Modify(bytes) => {
                    self.deliver(Packet { bytes, ..p }, "modify")?;
                }
            }
        }
        Ok(())
    }

    fn log_packet(&mut self, p: &Packet, action: &str, error: Option<String>) -> u64 {
        let seq = self.next_seq();
        let msg_type =
            Envelope::decode(&p.bytes).map(|e| e.name().to_string()).unwrap_or_else(|_| "Undecodable".into());
        self.log.push(MessageLogEntry {
            seq,
            time: self.now,
            from: p.from,
            to: p.to,
            msg_type,
            bytes: Bytes(p.bytes.clone()),
            action: action.to_string(),
            error,
        });
        self.costs.push(p.cost_ms);
        seq
    }

    fn deliver(&mut self, p: Packet, action: &str) -> Result<(), HarnessError> {
        let idx = self.log.len();
        self.log_packet(&p, action, None);
        let env = match Envelope::decode(&p.bytes) {
            Ok(env) => env,
            Err(e) => {
                let err = ActorError::Codec(e);
                self.log[idx].error = Some(err.name().into());
                self.fail(p.to, None, err);
                return Ok(());
            }
        };
        let from = p.from;
        let result = self.act(p.to, |a, ctx| a.handle(ctx, from, &env))?;
        if let Err(e) = result {
            self.log[idx].error = Some(e.name().into());
            if p.to != Addr::Adversary {
                self.fail(p.to, Some(env.name().into()), e);
            }
        }
        Ok(())
    }

    // Flows. Each starts one exchange and runs the bus to quiescence.

    /// Verinym onboarding of an EMSP with the steward.
    pub fn onboard_emsp(&mut self, emsp: u16) -> Result<(), HarnessError> {
        self.act(Addr::Emsp(emsp), |a, ctx| {
            if let ActorMut::Emsp(e) = a {
                e.start_onboarding(ctx)
            }
        })?;
        self.run()
    }

    /// Publishes schema, credential definition and revocation registry.
    pub fn publish(&mut self, emsp: u16) -> Result<(), HarnessError> {
        let bits = self.config.modulus_bits;
        self.kick(Addr::Emsp(emsp), |a, ctx| match a {
            ActorMut::Emsp(e) => e.publish_issuer(ctx, bits),
            _ => unreachable!(),
        })?;
        self.run()
    }

    /// Provisioning DID creation and registration.
    pub fn provision(&mut self, ev: u16) -> Result<(), HarnessError> {
        self.act(Addr::Ev(ev), |a, ctx| {
            if let ActorMut::Ev(w) = a {
                w.start_provisioning(ctx)
            }
        })?;
        self.run()
    }

    /// Out-of-band DID handover and contract conclusion.
    pub fn contract(&mut self, ev: u16, emsp: u16, tariff: &str) -> Result<Option<ContractId>, HarnessError> {
        let prov = self.ev(ev)?.prov_did().cloned();
        let Some(prov) = prov else {
            self.fail(Addr::Ev(ev), None, ActorError::Rejected("no provisioning DID to hand over".into()));
            return Ok(None);
        };
        let r = self.act(Addr::Emsp(emsp), |a, ctx| match a {
            ActorMut::Emsp(e) => e.register_contract(ctx, &prov, tariff),
            _ => unreachable!(),
        })?;
        match r {
            Ok(id) => Ok(Some(id)),
            Err(e) => {
                self.fail(Addr::Emsp(emsp), None, e);
                Ok(None)
            }
        }
    }

    /// Credential installation (offer, blinded request, issuance).
    pub fn install(&mut self, ev: u16, emsp: u16) -> Result<(), HarnessError> {
        self.emsp(emsp)?;
        self.kick(Addr::Ev(ev), |a, ctx| match a {
            ActorMut::Ev(w) => w.start_install(ctx, Addr::Emsp(emsp)),
            _ => unreachable!(),
        })?;
        self.run()
    }

    /// Discovery, proof request, presentation and billing.
    pub fn charge(&mut self, ev: u16, cp: u16) -> Result<(), HarnessError> {
        if cp as usize >= self.cps.len() {
            return Err(script(format!("no actor cp{cp}")));
        }
        self.act(Addr::Ev(ev), |a, ctx| {
            if let ActorMut::Ev(w) = a {
                w.start_charge(ctx, Addr::Cp(cp))
            }
        })?;
        self.run()
    }

    /// Revokes the newest credential of an EV at its issuing EMSP.
    pub fn revoke(&mut self, ev: u16) -> Result<(), HarnessError> {
        let Some(cred) = self.ev(ev)?.credentials.last() else {
            return Err(script(format!("ev{ev} holds no credential to revoke")));
        };
        let (emsp, id) = (cred.emsp, cred.contract_id);
        self.kick(emsp, |a, ctx| match a {
            ActorMut::Emsp(e) => e.revoke(ctx, &id).map(|_| ()),
            _ => unreachable!(),
        })
    }

    pub fn advance(&mut self, secs: u64) {
        self.now += secs;
    }

    /// With a revealed pre-shared key, registers a verinym of the
    /// adversary's choosing under the EMSP's name.
    pub fn forge_verinym(&mut self, emsp: u16) -> Result<(), HarnessError> {
        let name = Addr::Emsp(emsp).to_string();
        if !self.adversary.loot.psks.contains_key(&name) {
            return Err(script(format!("{name} pre-shared key not revealed")));
        }
        self.act(Addr::Adversary, |a, ctx| {
            if let ActorMut::Adversary(adv) = a {
                adv.start_forge_verinym(ctx, &name)
            }
        })?;
        self.run()
    }

    /// With an EV's revealed provisioning key, runs credential
    /// installation against the EMSP in the EV's place.
    pub fn steal_install(&mut self, ev: u16, emsp: u16) -> Result<(), HarnessError> {
        let Some(prov) = self.adversary.loot.prov.get(&Addr::Ev(ev)).cloned() else {
            return Err(script(format!("ev{ev} provisioning key not revealed")));
        };
        self.emsp(emsp)?;
        self.kick(Addr::Adversary, |a, ctx| match a {
            ActorMut::Adversary(adv) => adv.start_steal_install(ctx, prov, Addr::Emsp(emsp)),
            _ => unreachable!(),
        })?;
        self.run()
    }

    pub fn ev(&self, i: u16) -> Result<&EvWallet<S>, HarnessError> {
        self.evs.get(i as usize).ok_or_else(|| script(format!("no actor ev{i}")))
    }

    pub fn emsp(&self, i: u16) -> Result<&Emsp<S>, HarnessError> {
        self.emsps.get(i as usize).ok_or_else(|| script(format!("no actor emsp{i}")))
    }

    /// Latest credential held by an EV.
    pub fn credential(&self, ev: u16) -> Option<&ContractCredential<S>> {
        self.evs.get(ev as usize)?.credentials.last()
    }

    /// Names of all captured failures, in order.
    pub fn failure_names(&self) -> Vec<&'static str> {
        self.failures.iter().map(|f| f.error.name()).collect()
    }

    /// The trace and message log as newline-delimited hex, ordered by
    /// sequence number. Wall-clock costs are not part of the export.
    pub fn export_trace(&self) -> String {
        let mut items: Vec<(u64, Vec<u8>)> = self.trace.iter().map(|e| (e.seq, e.to_bytes())).collect();
        items.extend(self.log.iter().map(|m| (m.seq, m.to_bytes())));
        items.sort_by_key(|(seq, _)| *seq);
        let mut out = String::new();
        for (_, bytes) in items {
            out.push_str(&hex::encode(bytes));
            out.push('\n');
        }
        out
    }

    /// Onboards and publishes every EMSP, provisions every EV, concludes one
    /// contract per EV with EMSP `ev % emsps` and installs its credential.
    pub fn setup_all(&mut self) -> Result<(), HarnessError> {
        for i in 0..self.emsps.len() as u16 {
            self.onboard_emsp(i)?;
            self.publish(i)?;
        }
        let n_emsp = self.emsps.len() as u16;
        for i in 0..self.evs.len() as u16 {
            self.provision(i)?;
            if n_emsp > 0 {
                self.contract(i, i % n_emsp, "standard")?;
                self.install(i, i % n_emsp)?;
            }
        }
        Ok(())
    }
}

/// Decodes a trace export back into events and log entries.
pub fn parse_trace_export(text: &str) -> Result<(Vec<TraceEvent>, Vec<MessageLogEntry>), HarnessError> {
    let mut events = Vec::new();
    let mut log = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bytes = hex::decode(line.trim()).map_err(|e| HarnessError::Parse(format!("line {}: {e}", n + 1)))?;
        let value = crate::codec::WireValue::from_bytes(&bytes)
            .map_err(|e| HarnessError::Parse(format!("line {}: {e}", n + 1)))?;
        let bad = |e: crate::codec::CodecError| HarnessError::Parse(format!("line {}: {e}", n + 1));
        match &value {
            crate::codec::WireValue::Record { tag: tags::TRACE_EVENT, .. } => {
                events.push(TraceEvent::from_wire(&value).map_err(bad)?)
            }
            crate::codec::WireValue::Record { tag: tags::MESSAGE_LOG_ENTRY, .. } => {
                log.push(MessageLogEntry::from_wire(&value).map_err(bad)?)
            }
            other => return Err(HarnessError::Parse(format!("line {}: unexpected {}", n + 1, other.kind()))),
        }
    }
    Ok((events, log))
}
