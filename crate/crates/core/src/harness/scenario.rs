//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7
//! backend = "symbolic"          # or "concrete"
//! modulus_bits = 512            # concrete issuer modulus size
//!
//! [actors]
//! emsps = 1
//! evs = 2
//! cps = 2
//! cpos = 1
//! offline_evs = [1]             # EVs whose EMSP traffic is relayed by a CP
//!
//! [adversary]
//! mode = "dolev-yao"            # passive | dolev-yao | key-reveal
//! rate = 0.2                    # tamper probability per packet
//! actions = ["drop", "replay"]  # default: all five
//! reveal = ["emsp0"]            # actors whose keys leak at start
//!
//! [[step]]
//! action = "onboard_emsp"
//! emsp = 0
//!
//! [[assert]]
//! check = "agreement"
//! expect = "pass"
//! ```
//!
//! Step actions: `setup` (onboard, publish, provision, contract and install
//! for every actor), `onboard_emsp {emsp}`, `publish {emsp}`,
//! `provision {ev}`, `contract {ev, emsp, tariff?}`, `install {ev, emsp}`,
//! `charge {ev, cp}`, `revoke {ev}`, `advance {secs}`, `reveal {actor}`,
//! `forge_verinym {emsp}`, `steal_install {ev, emsp}`.
//!
//! Checks: `agreement {labels?, expect}`, `billing_count {emsp, count}`,
//! `authorized {ev, count}`, `error {name, actor?, present?}`,
//! `secrecy`, `no_truncation`.

use std::collections::BTreeSet;

use serde::Deserialize;

use super::{
    check_all_agreement, check_wallet_secrecy, AdversaryMode, AdversaryPolicy, DyAction, HarnessError, World,
    WorldConfig,
};
use crate::actors::{Addr, Label};
use crate::crypto::{Concrete, CryptoSuite, Symbolic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Concrete,
    #[default]
    Symbolic,
}

impl Backend {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concrete" => Some(Backend::Concrete),
            "symbolic" => Some(Backend::Symbolic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorCounts {
    #[serde(default = "one")]
    pub emsps: u16,
    #[serde(default = "one")]
    pub evs: u16,
    #[serde(default = "one")]
    pub cps: u16,
    #[serde(default = "one")]
    pub cpos: u16,
    #[serde(default)]
    pub offline_evs: BTreeSet<u16>,
}

fn one() -> u16 {
    1
}

impl Default for ActorCounts {
    fn default() -> Self {
        Self { emsps: 1, evs: 1, cps: 1, cpos: 1, offline_evs: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub actions: Option<Vec<String>>,
    #[serde(default)]
    pub reveal: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Setup,
    OnboardEmsp {
        emsp: u16,
    },
    Publish {
        emsp: u16,
    },
    Provision {
        ev: u16,
    },
    Contract {
        ev: u16,
        emsp: u16,
        #[serde(default = "standard")]
        tariff: String,
    },
    Install {
        ev: u16,
        emsp: u16,
    },
    Charge {
        ev: u16,
        cp: u16,
    },
    Revoke {
        ev: u16,
    },
    Advance {
        secs: u64,
    },
    Reveal {
        actor: String,
    },
    ForgeVerinym {
        emsp: u16,
    },
    StealInstall {
        ev: u16,
        emsp: u16,
    },
}

fn standard() -> String {
    "standard".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    Agreement {
        #[serde(default)]
        labels: Vec<String>,
        #[serde(default = "pass")]
        expect: String,
    },
    BillingCount {
        emsp: u16,
        count: usize,
    },
    Authorized {
        ev: u16,
        count: u64,
    },
    Error {
        name: String,
        #[serde(default)]
        actor: Option<String>,
        #[serde(default = "yes")]
        present: bool,
    },
    Secrecy,
    NoTruncation,
}

fn pass() -> String {
    "pass".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_bits")]
    pub modulus_bits: u64,
    #[serde(default)]
    pub actors: ActorCounts,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
    #[serde(default, rename = "assert")]
    pub asserts: Vec<Assertion>,
}

fn default_bits() -> u64 {
    512
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn world_config(&self) -> Result<WorldConfig, HarnessError> {
        let mode = match self.adversary.mode.as_deref() {
            None => AdversaryMode::Passive,
            Some(m) => {
                AdversaryMode::parse(m).ok_or_else(|| HarnessError::Parse(format!("unknown adversary mode {m:?}")))?
            }
        };
        let actions = match &self.adversary.actions {
            None => DyAction::ALL.into(),
            Some(list) => list
                .iter()
                .map(|a| {
                    DyAction::parse(a).ok_or_else(|| HarnessError::Parse(format!("unknown adversary action {a:?}")))
                })
                .collect::<Result<BTreeSet<_>, _>>()?,
        };
        let reveal = self
            .adversary
            .reveal
            .iter()
            .map(|a| a.parse::<Addr>().map_err(HarnessError::Parse))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let rate = self.adversary.rate.unwrap_or(if mode == AdversaryMode::DolevYao { 0.2 } else { 0.0 });
        if !(0.0..=1.0).contains(&rate) {
            return Err(HarnessError::Parse(format!("adversary rate {rate} outside [0, 1]")));
        }
        Ok(WorldConfig {
            seed: self.seed,
            modulus_bits: self.modulus_bits,
            emsps: self.actors.emsps,
            evs: self.actors.evs,
            cps: self.actors.cps,
            cpos: self.actors.cpos,
            offline_evs: self.actors.offline_evs.clone(),
            adversary: AdversaryPolicy { mode, rate, actions, reveal },
            ..WorldConfig::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Backend-independent result of a scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trace_export: String,
    pub assertions: Vec<AssertionResult>,
    pub failures: Vec<String>,
    pub messages: usize,
    pub events: usize,
}

impl ScenarioRun {
    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Executes a scenario under the backend it names.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun, HarnessError> {
    match s.backend {
        Backend::Concrete => run_with(Concrete, s),
        Backend::Symbolic => run_with(Symbolic::new(s.seed), s),
    }
}

fn run_with<S: CryptoSuite>(suite: S, s: &Scenario) -> Result<ScenarioRun, HarnessError> {
    let mut w = World::new(suite, s.world_config()?)?;
    for step in &s.steps {
        apply_step(&mut w, step)?;
    }
    let assertions = s.asserts.iter().map(|a| evaluate(&w, a)).collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioRun {
        trace_export: w.export_trace(),
        assertions,
        failures: w.failures.iter().map(|f| format!("{} {}", f.actor, f.error.name())).collect(),
        messages: w.log.len(),
        events: w.trace.len(),
    })
}

/// Applies one script step to a world.
pub fn apply_step<S: CryptoSuite>(w: &mut World<S>, step: &Step) -> Result<(), HarnessError> {
    match step {
        Step::Setup => w.setup_all(),
        Step::OnboardEmsp { emsp } => {
            w.emsp(*emsp)?;
            w.onboard_emsp(*emsp)
        }
        Step::Publish { emsp } => {
            w.emsp(*emsp)?;
            w.publish(*emsp)
        }
        Step::Provision { ev } => {
            w.ev(*ev)?;
            w.provision(*ev)
        }
        Step::Contract { ev, emsp, tariff } => {
            w.emsp(*emsp)?;
            w.contract(*ev, *emsp, tariff).map(|_| ())
        }
        Step::Install { ev, emsp } => {
            w.ev(*ev)?;
            w.install(*ev, *emsp)
        }
        Step::Charge { ev, cp } => {
            w.ev(*ev)?;
            w.charge(*ev, *cp)
        }
        Step::Revoke { ev } => w.revoke(*ev),
        Step::Advance { secs } => {
            w.advance(*secs);
            Ok(())
        }
        Step::Reveal { actor } => w.reveal(actor.parse().map_err(HarnessError::Script)?),
        Step::ForgeVerinym { emsp } => w.forge_verinym(*emsp),
        Step::StealInstall { ev, emsp } => w.steal_install(*ev, *emsp),
    }
}

fn evaluate<S: CryptoSuite>(w: &World<S>, a: &Assertion) -> Result<AssertionResult, HarnessError> {
    let r = |name: String, pass: bool, detail: String| AssertionResult { name, pass, detail };
    Ok(match a {
        Assertion::Agreement { labels, expect } => {
            let wanted: Vec<Label> = if labels.is_empty() {
                Label::ALL.to_vec()
            } else {
                labels.iter().map(|l| l.parse().map_err(HarnessError::Parse)).collect::<Result<_, _>>()?
            };
            let expect_pass = match expect.as_str() {
                "pass" => true,
                "fail" => false,
                other => {
                    return Err(HarnessError::Parse(format!("agreement expect must be pass or fail, got {other:?}")))
                }
            };
            let reports: Vec<_> =
                check_all_agreement(&w.trace).into_iter().filter(|r| wanted.contains(&r.label)).collect();
            let all_pass = reports.iter().all(|r| r.pass());
            let detail = reports
                .iter()
                .map(|r| {
                    format!(
                        "{}: {} commits, {} matched, {} excepted{}",
                        r.label,
                        r.commits,
                        r.matched,
                        r.excepted,
                        if r.pass() { "" } else { ", FAIL" }
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            r(format!("agreement expect {expect}"), all_pass == expect_pass, detail)
        }
        Assertion::BillingCount { emsp, count } => {
            let n = w.emsp(*emsp)?.billing.len();
            r(format!("billing_count emsp{emsp} == {count}"), n == *count, format!("{n} billing records"))
        }
        Assertion::Authorized { ev, count } => {
            let n = w.ev(*ev)?.authorized_sessions;
            r(format!("authorized ev{ev} == {count}"), n == *count, format!("{n} authorized sessions"))
        }
        Assertion::Error { name, actor, present } => {
            let actor: Option<Addr> = actor.as_deref().map(|a| a.parse().map_err(HarnessError::Parse)).transpose()?;
            let found = w.failures.iter().any(|f| f.error.name() == name && actor.is_none_or(|a| a == f.actor));
            let who = actor.map_or_else(|| "any actor".to_string(), |a| a.to_string());
            r(
                format!("error {name} at {who} {}", if *present { "present" } else { "absent" }),
                found == *present,
                format!("failures: {}", w.failure_names().join(", ")),
            )
        }
        Assertion::Secrecy => match check_wallet_secrecy(w) {
            Ok(()) => r("secrecy".into(), true, format!("{} messages scanned", w.log.len())),
            Err(leak) => r("secrecy".into(), false, format!("secret of {} in message {}", leak.owner, leak.seq)),
        },
        Assertion::NoTruncation => r("no_truncation".into(), !w.truncated, format!("{} messages", w.log.len())),
    })
}
