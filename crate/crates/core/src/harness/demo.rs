//! The end-to-end walk through steps 1 to 12 with one actor of each kind.

use super::{HarnessError, World, WorldConfig};
use crate::actors::{ActorError, BillingRecord, Label, SessionStatus, TraceKind};
use crate::crypto::{ContractId, CryptoSuite};

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub seed: u64,
    pub modulus_bits: u64,
    pub revoke_before_charge: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { seed: 1, modulus_bits: 2048, revoke_before_charge: false }
    }
}

#[derive(Debug, Clone)]
pub struct DemoStep {
    pub number: u8,
    pub title: &'static str,
    pub ok: bool,
    pub detail: String,
}

pub struct DemoReport<S: CryptoSuite> {
    pub steps: Vec<DemoStep>,
    pub contract_id: Option<ContractId>,
    pub billing: Vec<BillingRecord>,
    /// First handler error, if any.
    pub error: Option<ActorError>,
    pub world: World<S>,
}

impl<S: CryptoSuite> DemoReport<S> {
    /// True iff the EMSP committed to a billing record.
    pub fn billed(&self) -> bool {
        self.world.trace.iter().any(|e| e.kind == TraceKind::Commit && e.label == Label::Billing)
    }

    pub fn success(&self) -> bool {
        self.error.is_none() && self.billed()
    }

    /// Human-readable step summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let mark = if s.ok { "ok" } else { "FAILED" };
            out.push_str(&format!("{:>2}. {:<48} {:<6} {}\n", s.number, s.title, mark, s.detail));
        }
        match &self.error {
            None if self.billed() => out.push_str("result: billing committed\n"),
            None => out.push_str("result: incomplete\n"),
            Some(e) => out.push_str(&format!("result: {} ({e})\n", e.name())),
        }
        out
    }
}

fn sent<S: CryptoSuite>(world: &World<S>, since: usize, msg: &str) -> Option<usize> {
    world.log[since..].iter().find(|m| m.msg_type == msg && m.error.is_none()).map(|m| m.bytes.0.len())
}

fn size_note(size: Option<usize>, msg: &str) -> String {
    size.map_or_else(|| format!("{msg} missing"), |n| format!("{msg} {n} B"))
}

/// Runs the full flow. Flow errors end up in the report rather than in the
/// `Err` branch, which is reserved for harness misuse.
pub fn run_demo<S: CryptoSuite>(suite: S, config: &DemoConfig) -> Result<DemoReport<S>, HarnessError> {
    let wc = WorldConfig { seed: config.seed, modulus_bits: config.modulus_bits, ..WorldConfig::default() };
    let mut w = World::new(suite, wc)?;
    let mut steps = Vec::new();
    let mut push = |number, title, ok, detail: String| steps.push(DemoStep { number, title, ok, detail });

    w.onboard_emsp(0)?;
    w.publish(0)?;
    let issuer_ready = w.emsps[0].is_onboarded() && w.emsps[0].issuer.is_some();

    let mark = w.log.len();
    w.provision(0)?;
    let prov = w.evs[0].prov_did().cloned();
    let registered = prov.as_ref().is_some_and(|d| w.ledger.get_did(d).is_ok());
    push(
        1,
        "Provisioning DID creation and registration",
        issuer_ready && registered,
        prov.as_ref().map_or_else(|| "no DID".into(), |d| format!("{d}, {} messages", w.log.len() - mark)),
    );
    push(2, "Provisioning DID handover to the EMSP", prov.is_some(), "out of band".into());

    let contract_id = if prov.is_some() { w.contract(0, 0, "standard")? } else { None };
    push(
        3,
        "Contract conclusion",
        contract_id.is_some(),
        contract_id.map_or_else(String::new, |c| format!("contract {c}")),
    );

    let mark = w.log.len();
    if contract_id.is_some() {
        w.install(0, 0)?;
    }
    let offer_req = sent(&w, mark, "GetCredOfferReq");
    let offer_res = sent(&w, mark, "GetCredOfferRes");
    let cred_req = sent(&w, mark, "CreateContractCredentialReq");
    let cred_res = sent(&w, mark, "CreateContractCredentialRes");
    let stored = w.credential(0).is_some();
    push(4, "GetCredOfferReq", offer_req.is_some(), size_note(offer_req, "GetCredOfferReq"));
    push(5, "GetCredOfferRes with credential offer", offer_res.is_some(), size_note(offer_res, "GetCredOfferRes"));
    push(6, "Master secret blinding", cred_req.is_some(), "blinded secret with correctness proof".into());
    push(
        7,
        "Credential request and issuance",
        cred_res.is_some(),
        size_note(cred_req, "CreateContractCredentialReq") + ", " + &size_note(cred_res, "CreateContractCredentialRes"),
    );
    push(
        8,
        "Credential verified and stored",
        stored,
        if stored { "wallet holds 1 credential".into() } else { String::new() },
    );

    if config.revoke_before_charge && stored {
        w.revoke(0)?;
        w.advance(60);
    }

    let mark = w.log.len();
    w.advance(5);
    if stored {
        w.charge(0, 0)?;
    }
    let proof_req = sent(&w, mark, "RequestProofRes");
    let pres = sent(&w, mark, "ValidateContractProofReq");
    let authorized =
        w.cps[0].sessions.values().any(|s| matches!(s.status, SessionStatus::Authorized | SessionStatus::Billed));
    let billing: Vec<BillingRecord> = w.emsps[0].billing.clone();
    push(9, "Service discovery and proof request", proof_req.is_some(), size_note(proof_req, "RequestProofRes"));
    push(
        10,
        "Presentation and contract authentication data",
        pres.is_some(),
        size_note(pres, "ValidateContractProofReq"),
    );
    push(
        11,
        "Proof validation at the charge point",
        authorized,
        if authorized { "Authorized".into() } else { String::new() },
    );
    push(
        12,
        "Billing through the CPO to the EMSP",
        billing.len() == 1,
        billing.first().map_or_else(String::new, |b| format!("contract {} billed {} Wh", b.contract_id, b.meter_wh)),
    );
    let error = w.failures.first().map(|f| f.error.clone());
    Ok(DemoReport { steps, contract_id, billing, error, world: w })
}
