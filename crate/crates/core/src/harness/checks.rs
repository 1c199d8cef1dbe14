use std::collections::BTreeSet;

use memchr::memmem;

use super::World;
use crate::actors::{Label, TraceEvent, TraceKind};
use crate::crypto::CryptoSuite;

/// Outcome of the injective agreement check for one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementReport {
    pub label: Label,
    pub commits: usize,
    pub matched: usize,
    /// Commits skipped because a participant's keys were revealed.
    pub excepted: usize,
    /// The first Commit without a unique earlier Running, if any.
    pub counterexample: Option<TraceEvent>,
}

impl AgreementReport {
    pub fn pass(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Every Commit for `label` must consume a distinct earlier Running with
/// byte-equal agreement data. Commits whose actor or peer had its keys
/// revealed anywhere in the trace are exempt.
pub fn check_injective_agreement(trace: &[TraceEvent], label: Label) -> AgreementReport {
    let revealed: BTreeSet<&str> =
        trace.iter().filter(|e| e.kind == TraceKind::Reveal).map(|e| e.actor.as_str()).collect();
    let mut open: Vec<&TraceEvent> = Vec::new();
    let mut report = AgreementReport { label, commits: 0, matched: 0, excepted: 0, counterexample: None };
    for e in trace.iter().filter(|e| e.label == label) {
        match e.kind {
            TraceKind::Running => open.push(e),
            TraceKind::Commit => {
                report.commits += 1;
                if let Some(i) = open.iter().position(|r| r.ds == e.ds) {
                    open.remove(i);
                    report.matched += 1;
                } else if revealed.contains(e.actor.as_str()) || revealed.contains(e.peer.as_str()) {
                    report.excepted += 1;
                } else if report.counterexample.is_none() {
                    report.counterexample = Some(e.clone());
                }
            }
            TraceKind::Reveal => {}
        }
    }
    report
}

pub fn check_all_agreement(trace: &[TraceEvent]) -> Vec<AgreementReport> {
    Label::ALL.iter().map(|l| check_injective_agreement(trace, *l)).collect()
}

/// A long-term secret found verbatim in a transmitted message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecrecyLeak {
    pub owner: String,
    pub seq: u64,
}

/// Searches every packet placed on the bus for the wallet secrets, private
/// keys and contract keys of all honest actors.
pub fn check_wallet_secrecy<S: CryptoSuite>(world: &World<S>) -> Result<(), SecrecyLeak> {
    let mut secrets: Vec<(String, Vec<u8>)> = Vec::new();
    for ev in &world.evs {
        secrets.extend(ev.secrets().into_iter().map(|s| (ev.addr.to_string(), s)));
    }
    for e in &world.emsps {
        secrets.extend(e.secrets().into_iter().map(|s| (e.addr.to_string(), s)));
    }
    secrets.push(("steward".into(), world.steward.keys.secret.sig.0.clone()));
    secrets.push(("steward".into(), world.steward.keys.secret.enc.0.clone()));
    secrets.retain(|(_, s)| s.len() >= 8);
    let finders: Vec<_> = secrets.iter().map(|(owner, s)| (owner, memmem::Finder::new(s))).collect();
    for entry in &world.log {
        for (owner, f) in &finders {
            if f.find(&entry.bytes.0).is_some() {
                return Err(SecrecyLeak { owner: owner.to_string(), seq: entry.seq });
            }
        }
    }
    Ok(())
}
