use std::sync::Barrier;

use pnc_ssi::codec::Wire;
use pnc_ssi::crypto::{drbg, Concrete, CryptoSuite, DeltaEntry, DidKeys, RevocationRegistry, Symbolic, RESERVED_SLOTS};
use pnc_ssi::ledger::{
    parse_genesis, render_genesis, replay, CredentialDefinition, CredentialSchema, DidRecord, Ledger, LedgerError, Role,
};
use sha2::{Digest, Sha256};

struct Fixture<S: CryptoSuite> {
    suite: S,
    ledger: Ledger<S>,
    steward: DidKeys,
    emsp: DidKeys,
    other_emsp: DidKeys,
    client: DidKeys,
}

fn fixture<S: CryptoSuite>(suite: S) -> Fixture<S> {
    let mut rng = drbg(1, "ledger");
    let steward = suite.gen_did_keys(&mut rng);
    let emsp = suite.gen_did_keys(&mut rng);
    let other_emsp = suite.gen_did_keys(&mut rng);
    let client = suite.gen_did_keys(&mut rng);
    let ledger = Ledger::genesis(vec![DidRecord::new(steward.did.clone(), &steward.public, Role::Steward)]).unwrap();
    for k in [&emsp, &other_emsp] {
        ledger.write_did(&steward.did, DidRecord::new(k.did.clone(), &k.public, Role::Verinym)).unwrap();
    }
    ledger.write_did(&steward.did, DidRecord::new(client.did.clone(), &client.public, Role::Client)).unwrap();
    Fixture { suite, ledger, steward, emsp, other_emsp, client }
}

fn schema() -> CredentialSchema {
    CredentialSchema::new("contract", "1.0", &["emsp_id", "contract_ref", "tariff", "valid_until"])
}

/// Publishes schema, credential definition and registry for `fx.emsp`.
fn publish<S: CryptoSuite>(fx: &Fixture<S>) -> (S::IssuerSecretKey, String) {
    let mut rng = drbg(2, "issuer");
    let s = schema();
    let schema_id = fx.ledger.publish_schema(&fx.emsp.did, s.clone()).unwrap();
    let (pk, sk) = fx.suite.issuer_keygen(s.attr_names.len() + RESERVED_SLOTS, 512, &mut rng).unwrap();
    let def = CredentialDefinition::<S>::new(&schema_id, fx.emsp.did.clone(), "DE-EM001", pk.clone());
    let def_id = fx.ledger.publish_cred_def(&fx.emsp.did, def).unwrap();
    let (params, initial) = fx.suite.accumulator_setup(&pk, &mut rng);
    let reg = RevocationRegistry::<S>::new(&def_id, params, initial);
    let reg_id = fx.ledger.publish_registry(&fx.emsp.did, reg).unwrap();
    (sk, reg_id)
}

fn next_delta<S: CryptoSuite>(fx: &Fixture<S>, reg_id: &str, sk: &S::IssuerSecretKey, seed: u64) -> (u64, DeltaEntry) {
    let reg = fx.ledger.get_registry(reg_id).unwrap().value;
    let e = fx.suite.new_revocation_index(sk, &mut drbg(seed, "e"));
    let next = reg.add(&fx.suite, &e).unwrap();
    (reg.version(), next.deltas.last().unwrap().clone())
}

fn permissions<S: CryptoSuite>(suite: S) {
    let fx = fixture(suite);
    let rec = fx.ledger.get_did(&fx.emsp.did).unwrap().value;
    assert_eq!(rec.role, Role::Verinym);

    let mut rng = drbg(3, "extra");
    let extra = fx.suite.gen_did_keys(&mut rng);
    let record = DidRecord::new(extra.did.clone(), &extra.public, Role::Verinym);
    for caller in [&fx.emsp.did, &fx.client.did, &extra.did] {
        let r = fx.ledger.write_did(caller, record.clone());
        assert!(matches!(r, Err(LedgerError::PermissionDenied { .. })), "{caller}");
    }
    let existing = DidRecord::new(fx.emsp.did.clone(), &fx.emsp.public, Role::Verinym);
    assert!(matches!(fx.ledger.write_did(&fx.steward.did, existing), Err(LedgerError::DuplicateDid(_))));
    assert!(matches!(fx.ledger.publish_schema(&fx.client.did, schema()), Err(LedgerError::PermissionDenied { .. })));

    let bad = CredentialSchema::new("contract", "1.0", &["contract_ref"]);
    assert!(matches!(fx.ledger.publish_schema(&fx.emsp.did, bad), Err(LedgerError::Invalid(_))));
}

#[test]
fn write_permissions_concrete() {
    permissions(Concrete);
}

#[test]
fn write_permissions_symbolic() {
    permissions(Symbolic::new(1));
}

#[test]
fn objects_are_readable_and_content_addressed() {
    let fx = fixture(Concrete);
    let (_, reg_id) = publish(&fx);
    let reg = fx.ledger.get_registry(&reg_id).unwrap().value;
    let def = fx.ledger.get_cred_def(&reg.cred_def_id).unwrap().value;
    let s = fx.ledger.get_schema(&def.schema_id).unwrap().value;
    assert_eq!(s, schema());
    assert_eq!(fx.ledger.registry_for_cred_def(&def.id), Some(reg_id.clone()));
    assert_eq!(fx.ledger.cred_defs_for_emsp("DE-EM001").len(), 1);

    // Identifiers survive a re-encode and match an independent digest.
    let again = CredentialDefinition::<Concrete>::from_bytes(&def.to_bytes()).unwrap();
    assert_eq!(again.id, def.id);
    assert_eq!(again.expected_id(), def.id);
    let schema_again = CredentialSchema::from_bytes(&s.to_bytes()).unwrap();
    assert_eq!(schema_again.expected_id(), s.id);
    let parts: [&[u8]; 4] =
        [def.schema_id.as_bytes(), def.issuer.as_str().as_bytes(), def.emsp_id.as_bytes(), &def.public_key.to_bytes()];
    assert_eq!(def.id, format!("creddef:{}", digest_oracle("pnc/cred-def-id/v1", &parts)));
    let attrs = s.attr_names.to_bytes();
    let parts: [&[u8]; 3] = [s.name.as_bytes(), s.version.as_bytes(), &attrs];
    assert_eq!(s.id, format!("schema:{}", digest_oracle("pnc/schema-id/v1", &parts)));

    assert!(matches!(fx.ledger.get_schema("schema:none"), Err(LedgerError::NotFound(_))));
    assert!(matches!(fx.ledger.get_did(&fx.suite_did()), Err(LedgerError::NotFound(_))));
}

/// Truncated SHA-256 over length-prefixed parts, computed independently.
fn digest_oracle(domain: &str, parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in std::iter::once(domain.as_bytes()).chain(parts.iter().copied()) {
        h.update((p.len() as u32).to_be_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..16])
}

trait SuiteDid {
    fn suite_did(&self) -> pnc_ssi::crypto::Did;
}

impl<S: CryptoSuite> SuiteDid for Fixture<S> {
    fn suite_did(&self) -> pnc_ssi::crypto::Did {
        self.suite.gen_did_keys(&mut drbg(99, "unregistered")).did
    }
}

#[test]
fn cred_def_without_schema_is_dangling() {
    let fx = fixture(Concrete);
    let (pk, _) = Concrete.issuer_keygen(6, 512, &mut drbg(4, "issuer")).unwrap();
    let def = CredentialDefinition::<Concrete>::new("schema:missing", fx.emsp.did.clone(), "DE-EM001", pk);
    assert!(matches!(fx.ledger.publish_cred_def(&fx.emsp.did, def), Err(LedgerError::DanglingReference(_))));
}

#[test]
fn accumulator_updates_need_the_issuer_and_the_current_version() {
    let fx = fixture(Concrete);
    let (sk, reg_id) = publish(&fx);
    let (base, delta) = next_delta(&fx, &reg_id, &sk, 5);
    let r = fx.ledger.update_accumulator(&fx.other_emsp.did, &reg_id, base, delta.clone());
    assert!(matches!(r, Err(LedgerError::PermissionDenied { .. })));
    fx.ledger.update_accumulator(&fx.emsp.did, &reg_id, base, delta.clone()).unwrap();
    let r = fx.ledger.update_accumulator(&fx.emsp.did, &reg_id, base, delta.clone());
    assert_eq!(r, Err(LedgerError::VersionConflict { base, current: base + 1 }));

    let read = fx.ledger.get_registry(&reg_id).unwrap().value;
    assert_eq!(read.value(), &delta.value);
    assert_eq!(fx.ledger.get_registry_delta(&reg_id, 0).unwrap(), vec![delta]);
    assert!(fx.ledger.get_registry_delta(&reg_id, 1).unwrap().is_empty());
}

#[test]
fn concurrent_updates_yield_exactly_one_conflict() {
    for round in 0..20 {
        let fx = fixture(Concrete);
        let (sk, reg_id) = publish(&fx);
        let a = next_delta(&fx, &reg_id, &sk, 100 + round);
        let b = next_delta(&fx, &reg_id, &sk, 200 + round);
        let barrier = Barrier::new(2);
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = [a, b]
                .into_iter()
                .map(|(base, delta)| {
                    let (fx, barrier, reg_id) = (&fx, &barrier, &reg_id);
                    scope.spawn(move || {
                        barrier.wait();
                        fx.ledger.update_accumulator(&fx.emsp.did, reg_id, base, delta)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let conflicts = results.iter().filter(|r| matches!(r, Err(LedgerError::VersionConflict { .. }))).count();
        let ok = results.iter().filter(|r| r.is_ok()).count();
        assert_eq!((ok, conflicts), (1, 1), "round {round}: {results:?}");
        assert_eq!(fx.ledger.get_registry(&reg_id).unwrap().value.version(), 1);
    }
}

#[test]
fn replaying_the_log_reproduces_the_state() {
    let fx = fixture(Concrete);
    let (sk, reg_id) = publish(&fx);
    for seed in 0..3 {
        let (base, delta) = next_delta(&fx, &reg_id, &sk, seed);
        fx.ledger.update_accumulator(&fx.emsp.did, &reg_id, base, delta).unwrap();
    }
    let state = fx.ledger.snapshot();
    let replayed = replay::<Concrete>(fx.ledger.genesis_records(), &fx.ledger.log()).unwrap();
    assert_eq!(replayed.to_bytes(), state.to_bytes());

    let restored = Ledger::<Concrete>::from_dump(&fx.ledger.dump()).unwrap();
    assert_eq!(restored.snapshot().to_bytes(), state.to_bytes());
    assert_eq!(restored.dump(), fx.ledger.dump());

    // Every logged write names its caller and the role that allowed it.
    for entry in fx.ledger.log() {
        let role = match entry.op.name() {
            "write_did" => Role::Steward,
            _ => Role::Verinym,
        };
        assert_eq!(entry.caller_role, role);
    }
}

#[test]
fn tampered_log_does_not_replay() {
    let fx = fixture(Concrete);
    publish(&fx);
    let mut log = fx.ledger.log();
    log[0].caller = fx.client.did.clone();
    assert!(replay::<Concrete>(fx.ledger.genesis_records(), &log).is_err());
    let log = fx.ledger.log();
    assert!(replay::<Concrete>(fx.ledger.genesis_records(), &log[1..]).is_err());
}

#[test]
fn genesis_file_round_trip() {
    let fx = fixture(Concrete);
    let text = render_genesis(fx.ledger.genesis_records());
    assert_eq!(parse_genesis(&text).unwrap(), fx.ledger.genesis_records());
    let not_steward = DidRecord::new(fx.client.did.clone(), &fx.client.public, Role::Client);
    assert!(Ledger::<Concrete>::genesis(vec![not_steward]).is_err());
}
