//! Acceptance criteria. Prints one PASS or FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

mod common;

use num_bigint::BigUint;
use pnc_ssi::actors::{ActorError, Label, SessionStatus, TraceEvent, TraceKind};
use pnc_ssi::codec::Bytes;
use pnc_ssi::crypto::{drbg, Concrete, CryptoSuite, Symbolic};
use pnc_ssi::harness::bench::{bench, BenchConfig, Flow};
use pnc_ssi::harness::demo::{run_demo, DemoConfig};
use pnc_ssi::harness::unlink::{run_unlinkability_game, UnlinkConfig};
use pnc_ssi::harness::{check_all_agreement, check_injective_agreement, AdversaryPolicy, World, WorldConfig};

use common::{accepted_mutants, raw_attrs, Issuer};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn demo_under<S: CryptoSuite>(suite: S) -> Outcome {
    let start = Instant::now();
    let report = run_demo(suite, &DemoConfig { seed: 1, modulus_bits: 512, revoke_before_charge: false })
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let id = report.contract_id.ok_or("no contract id issued")?;
    let entries = report.billing.len();
    let matches = report.billing.iter().filter(|b| b.contract_id == id).count();
    ensure(
        report.success() && entries == 1 && matches == 1 && secs < 60.0,
        format!("success={} billing entries={entries} matching contract_id={matches} {secs:.2}s", report.success()),
    )
}

fn criterion_demo() -> Outcome {
    let c = demo_under(Concrete).map_err(|e| format!("concrete: {e}"))?;
    let s = demo_under(Symbolic::new(1)).map_err(|e| format!("symbolic: {e}"))?;
    Ok(format!("concrete: {c}; symbolic: {s}"))
}

fn scenario_run<S: CryptoSuite>(suite: S, config: WorldConfig) -> World<S> {
    let mut w = World::new(suite, config).unwrap();
    w.setup_all().unwrap();
    for round in 0..2u16 {
        for ev in 0..w.evs.len() as u16 {
            w.advance(30);
            w.charge(ev, (ev + round) % w.cps.len() as u16).unwrap();
        }
    }
    w
}

fn world_config(seed: u64, adversary: AdversaryPolicy) -> WorldConfig {
    WorldConfig { seed, evs: 2, cps: 2, adversary, ..WorldConfig::default() }
}

fn criterion_agreement() -> Outcome {
    let mut commits = 0;
    for (seed, adversary) in (0..10)
        .map(|s| (s, AdversaryPolicy::default()))
        .chain((100..125).map(|s| (s, AdversaryPolicy::dolev_yao(0.25))))
    {
        let w = scenario_run(Concrete, world_config(seed, adversary));
        for r in check_all_agreement(&w.trace) {
            if !r.pass() {
                return Err(format!("seed {seed}: {} counterexample {:?}", r.label, r.counterexample));
            }
            commits += r.commits;
        }
    }
    let mut w = scenario_run(Concrete, world_config(1, AdversaryPolicy::default()));
    let template = w.trace.last().unwrap().clone();
    let forged = TraceEvent {
        seq: template.seq + 1,
        kind: TraceKind::Commit,
        label: Label::ChargeAuth,
        ds: Bytes(vec![1; 32]),
        ..template
    };
    w.trace.push(forged.clone());
    let report = check_injective_agreement(&w.trace, Label::ChargeAuth);
    ensure(
        report.counterexample.as_ref() == Some(&forged),
        format!(
            "5 labels x (10 honest + 25 Dolev-Yao seeds), {commits} commits matched; forged Commit rejected at seq {}",
            forged.seq
        ),
    )
}

fn criterion_unlinkability() -> Outcome {
    let out = run_unlinkability_game(Concrete, &UnlinkConfig { sessions_per_ev: 10, ..UnlinkConfig::default() })
        .map_err(|e| e.to_string())?;
    let emsp: Vec<_> = out.emsp.linking_fields.iter().cloned().collect();
    let emsp_ok = emsp.len() == 1 && emsp[0].ends_with("contract_id");
    ensure(
        out.cp_cpo.pass() && out.cp_cpo.sessions == 20 && out.authorized == 20 && emsp_ok,
        format!(
            "CP+CPO: {} sessions, {} linking fields; EMSP flags {emsp:?}",
            out.cp_cpo.sessions,
            out.cp_cpo.linking_fields.len()
        ),
    )
}

fn criterion_revocation() -> Outcome {
    let mut w = World::new(Concrete, WorldConfig { seed: 2, ..WorldConfig::default() }).unwrap();
    w.setup_all().unwrap();
    w.charge(0, 0).unwrap();
    let before =
        w.cps[0].sessions.values().any(|s| s.status == SessionStatus::Billed) && w.evs[0].authorized_sessions == 1;
    w.revoke(0).unwrap();
    w.charge(0, 0).unwrap();
    let after = w.failures.last().map(|f| f.error.clone());
    let revoked = after == Some(ActorError::RevokedCredential) && w.evs[0].authorized_sessions == 1;

    let mut issuer = Issuer::new(Concrete, 512, 40);
    let mut rng = drbg(40, "acceptance/witness");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c0", "standard"), &mut rng);
    let others: Vec<_> =
        (1..4).map(|i| issuer.issue(&raw_attrs("DE-EM001", &format!("c{i}"), "standard"), &mut rng)).collect();
    issuer.registry = issuer.registry.revoke(&Concrete, &issuer.sk, &others[1].rev_index).map_err(|e| e.to_string())?;
    let reg = &issuer.registry;
    let updated = Concrete
        .witness_update(
            &reg.params,
            &held.rev_index,
            &held.witness,
            reg.deltas_since(held.witness.version),
            reg.value(),
        )
        .map_err(|e| e.to_string())?;
    let product: BigUint = reg.active().iter().filter(|e| **e != held.rev_index).product();
    let exact = updated.value == reg.params.base.modpow(&product, &reg.params.modulus)
        && updated.value.modpow(&held.rev_index, &reg.params.modulus) == *reg.value();
    ensure(
        before && revoked && exact,
        format!("charge before revocation authorized={before}; after: {after:?}; witness after 3 adds + 1 remove exact={exact}"),
    )
}

fn criterion_mutation() -> Outcome {
    let mut issuer = Issuer::new(Concrete, 512, 41);
    let mut rng = drbg(41, "acceptance/mutation");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let mut mutants = 0;
    for i in 0..20u8 {
        let req = issuer.request([i; 16], &["emsp_id"]);
        let pres = issuer.present(&held, &req, &mut rng);
        if !issuer.verify(&pres, &req) {
            return Err(format!("presentation {i} does not verify"));
        }
        let accepted = accepted_mutants(&issuer, &pres, &req);
        if !accepted.is_empty() {
            return Err(format!("presentation {i}: accepted mutants {accepted:?}"));
        }
        let mut leaves = Vec::new();
        common::leaves("", &pnc_ssi::codec::Wire::to_wire(&pres), &mut leaves);
        mutants += leaves.len();
    }
    Ok(format!("20 presentations, {mutants} single-field mutants, all rejected"))
}

const REFERENCE_VALIDATE_MS: f64 = 282.302;
const REFERENCE_VALIDATE_BYTES: f64 = 7281.0;
const REFERENCE_CHARGE_MS: f64 = 487.502;
const REFERENCE_CREATE_REQ_BYTES: f64 = 2185.0;

fn criterion_bench() -> Outcome {
    let report =
        bench(Concrete, &BenchConfig { seed: 1, modulus_bits: 2048, repetitions: 100, ..BenchConfig::default() })
            .map_err(|e| e.to_string())?;
    let expected = [
        "GetCredOfferReq",
        "GetCredOfferRes",
        "CreateContractCredentialReq",
        "CreateContractCredentialRes",
        "RequestProofReq",
        "RequestProofRes",
        "ValidateContractProofReq",
        "ValidateContractProofRes",
    ];
    let rows_ok = expected.iter().all(|m| report.row(m).is_some_and(|r| r.n == 100));
    let charge = report.flow_total_ms(Flow::ChargeAuthorization);
    let validate = report.row("ValidateContractProofReq").ok_or("no ValidateContractProofReq row")?;
    let create = report.row("CreateContractCredentialReq").ok_or("no CreateContractCredentialReq row")?;
    let time_ok = (0.1 * REFERENCE_CHARGE_MS..=10.0 * REFERENCE_CHARGE_MS).contains(&charge);
    let size_ok = (0.25 * REFERENCE_VALIDATE_BYTES..=4.0 * REFERENCE_VALIDATE_BYTES).contains(&validate.size_mean);
    ensure(
        rows_ok && time_ok && size_ok,
        format!(
            "rows={rows_ok}; charge total {charge:.1} ms (reference {REFERENCE_CHARGE_MS}); ValidateContractProofReq {:.1} ms {:.0} B \
             (reference {REFERENCE_VALIDATE_MS} ms {REFERENCE_VALIDATE_BYTES} B); CreateContractCredentialReq {:.0} B (reference {REFERENCE_CREATE_REQ_BYTES} B)",
            validate.time_mean_ms, validate.size_mean, create.size_mean
        ),
    )
}

fn criterion_determinism() -> Outcome {
    let run = || scenario_run(Concrete, world_config(7, AdversaryPolicy::dolev_yao(0.2))).export_trace();
    let (a, b) = (run(), run());
    let sym = || scenario_run(Symbolic::new(7), world_config(7, AdversaryPolicy::default())).export_trace();
    ensure(
        a == b && sym() == sym(),
        format!("{} trace lines, {} bytes, identical across two runs", a.lines().count(), a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("1 demo", criterion_demo),
        ("2 injective agreement", criterion_agreement),
        ("3 unlinkability", criterion_unlinkability),
        ("4 revocation", criterion_revocation),
        ("5 mutation suite", criterion_mutation),
        ("7 determinism", criterion_determinism),
    ];
    let mut results: Vec<(&str, Outcome)> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|(name, f)| (*name, scope.spawn(f))).collect();
        handles.into_iter().map(|(name, h)| (name, h.join().unwrap_or_else(|_| Err("panicked".into())))).collect()
    });
    // Timed on its own so the other criteria do not compete for the CPU.
    results.insert(
        5,
        ("6 benchmark", std::panic::catch_unwind(criterion_bench).unwrap_or_else(|_| Err("panicked".into()))),
    );

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
