//! Field-level unlinkability experiment.
//!
//! Two EVs holding credentials under the same credential definition charge
//! alternately at several charge points. For each observer, every message
//! it sees in a session is flattened into named fields. A field links
//! sessions if it is constant across one EV's sessions without being
//! constant across all sessions.

use std::collections::{BTreeMap, BTreeSet};

use super::{HarnessError, MessageLogEntry, World, WorldConfig};
use crate::actors::messages::{open_envelope, record_fields, BillingForwardReq};
use crate::actors::{Addr, Fixture};
use crate::codec::{tags, Envelope, Wire, WireValue};
use crate::crypto::{ContractAuthPayload, CryptoSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observer {
    /// Charge points and their operator, colluding.
    CpCpo,
    Emsp,
}

impl Observer {
    fn sees(self, m: &MessageLogEntry) -> bool {
        let ends = [m.from, m.to];
        match self {
            Observer::CpCpo => ends.iter().any(|a| matches!(a, Addr::Cp(_) | Addr::Cpo(_))),
            Observer::Emsp => ends.iter().any(|a| matches!(a, Addr::Emsp(_))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnlinkConfig {
    pub seed: u64,
    pub modulus_bits: u64,
    pub sessions_per_ev: usize,
    pub charge_points: u16,
    pub fixture: Fixture,
}

impl Default for UnlinkConfig {
    fn default() -> Self {
        Self { seed: 1, modulus_bits: 512, sessions_per_ev: 10, charge_points: 3, fixture: Fixture::None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlinkReport {
    pub observer: Observer,
    pub sessions: usize,
    /// Fields with one value across every session.
    pub constant_fields: BTreeSet<String>,
    /// Fields constant for one EV but not for all.
    pub linking_fields: BTreeSet<String>,
}

impl UnlinkReport {
    pub fn pass(&self) -> bool {
        self.linking_fields.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct UnlinkOutcome {
    pub cp_cpo: UnlinkReport,
    pub emsp: UnlinkReport,
    pub authorized: usize,
}

struct Session {
    ev: u16,
    range: std::ops::Range<usize>,
}

/// Runs both EVs through `sessions_per_ev` charging sessions each and
/// analyses what each observer saw.
pub fn run_unlinkability_game<S: CryptoSuite>(suite: S, config: &UnlinkConfig) -> Result<UnlinkOutcome, HarnessError> {
    let wc = WorldConfig {
        seed: config.seed,
        modulus_bits: config.modulus_bits,
        emsps: 1,
        evs: 2,
        cps: config.charge_points.max(2),
        cpos: 1,
        ..WorldConfig::default()
    };
    let mut w = World::new(suite, wc)?;
    w.setup_all()?;
    for ev in &mut w.evs {
        ev.fixture = config.fixture;
    }
    let ncp = w.cps.len();
    let mut sessions = Vec::new();
    for i in 0..config.sessions_per_ev {
        for k in 0..2u16 {
            w.advance(37);
            let start = w.log.len();
            w.charge(k, ((i + k as usize) % ncp) as u16)?;
            sessions.push(Session { ev: k, range: start..w.log.len() });
        }
    }
    let authorized = w.evs.iter().map(|e| e.authorized_sessions as usize).sum();
    Ok(UnlinkOutcome {
        cp_cpo: analyse(&w, &sessions, Observer::CpCpo),
        emsp: analyse(&w, &sessions, Observer::Emsp),
        authorized,
    })
}

fn analyse<S: CryptoSuite>(w: &World<S>, sessions: &[Session], observer: Observer) -> UnlinkReport {
    let views: Vec<BTreeMap<String, String>> =
        sessions.iter().map(|s| session_view(w, &w.log[s.range.clone()], observer)).collect();
    let paths: BTreeSet<&String> = views.iter().flat_map(|v| v.keys()).collect();
    let constant = |idx: &[usize], p: &String| -> bool {
        let first = views[idx[0]].get(p);
        first.is_some() && idx.iter().all(|&i| views[i].get(p) == first)
    };
    let all: Vec<usize> = (0..views.len()).collect();
    let per_ev: Vec<Vec<usize>> =
        (0..2u16).map(|k| sessions.iter().enumerate().filter(|(_, s)| s.ev == k).map(|(i, _)| i).collect()).collect();
    let mut report = UnlinkReport {
        observer,
        sessions: sessions.len(),
        constant_fields: BTreeSet::new(),
        linking_fields: BTreeSet::new(),
    };
    if views.is_empty() {
        return report;
    }
    for p in paths {
        if constant(&all, p) {
            report.constant_fields.insert(p.clone());
        } else if per_ev.iter().any(|idx| !idx.is_empty() && constant(idx, p)) {
            report.linking_fields.insert(p.clone());
        }
    }
    report
}

/// Field path to value for everything `observer` learns in one session.
fn session_view<S: CryptoSuite>(
    w: &World<S>,
    entries: &[MessageLogEntry],
    observer: Observer,
) -> BTreeMap<String, String> {
    let mut fields: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in entries.iter().filter(|m| observer.sees(m) && m.action != "drop") {
        let Ok(env) = Envelope::decode(&m.bytes.0) else { continue };
        let name = env.name();
        let mut out = Vec::new();
        if let Some(hint) = &env.sender_hint {
            out.push((format!("{name}.sender_hint"), hint.clone()));
        }
        flatten::<S>(name, &env.payload, &mut out);
        if observer == Observer::Emsp && env.msg_type == tags::BILLING_FORWARD_REQ && matches!(m.to, Addr::Emsp(_)) {
            if let (Ok(req), Addr::Emsp(i)) = (open_envelope::<BillingForwardReq>(&env), m.to) {
                let keys = &w.emsps[i as usize].keys.secret;
                if let Ok(opened) = w.suite.pk_decrypt(keys, &req.contract_auth) {
                    if let Ok(payload) = ContractAuthPayload::from_bytes(&opened.plaintext) {
                        flatten::<S>("contract_auth", &payload.to_wire(), &mut out);
                    }
                }
            }
        }
        for (k, v) in out {
            fields.entry(k).or_default().push(v);
        }
    }
    fields.into_iter().map(|(k, v)| (k, v.join("|"))).collect()
}

/// Flattens a wire value into `(path, value)` pairs, naming record fields.
pub fn flatten<S: CryptoSuite>(prefix: &str, v: &WireValue, out: &mut Vec<(String, String)>) {
    match v {
        WireValue::Record { tag, fields } => {
            let names = record_fields::<S>(*tag);
            for (i, f) in fields.iter().enumerate() {
                let name = names.and_then(|n| n.get(i)).map_or_else(|| i.to_string(), |s| s.to_string());
                flatten::<S>(&format!("{prefix}.{name}"), f, out);
            }
        }
        WireValue::Seq(items) => {
            if items.is_empty() {
                out.push((prefix.to_string(), "[]".into()));
            }
            for (i, item) in items.iter().enumerate() {
                flatten::<S>(&format!("{prefix}[{i}]"), item, out);
            }
        }
        WireValue::Uint(n) => out.push((prefix.to_string(), n.to_str_radix(16))),
        WireValue::Bytes(b) => out.push((prefix.to_string(), hex::encode(b))),
        WireValue::Text(t) => out.push((prefix.to_string(), t.clone())),
    }
}
