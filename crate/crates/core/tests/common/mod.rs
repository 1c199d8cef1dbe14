//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigUint;
use pnc_ssi::actors::{ActorError, Addr, Ctx, Emitted};
use pnc_ssi::codec::{Envelope, Wire, WireValue};
use pnc_ssi::crypto::{
    cl, drbg, issue_credential, CryptoSuite, Drbg, MasterSecret, ProofRequest, RevocationRegistry, Witness,
    RESERVED_SLOTS,
};
use pnc_ssi::harness::World;

pub const NAMES: [&str; 3] = ["emsp_id", "contract_ref", "tariff"];

pub fn names() -> Vec<String> {
    NAMES.iter().map(|s| s.to_string()).collect()
}

pub struct Issuer<S: CryptoSuite> {
    pub suite: S,
    pub pk: S::IssuerPublicKey,
    pub sk: S::IssuerSecretKey,
    pub registry: RevocationRegistry<S>,
}

pub struct Held<S: CryptoSuite> {
    pub cred: S::Credential,
    pub raw: Vec<String>,
    pub rev_index: BigUint,
    pub witness: Witness,
}

impl<S: CryptoSuite> Issuer<S> {
    pub fn new(suite: S, bits: u64, seed: u64) -> Self {
        let mut rng = drbg(seed, "test/issuer");
        let (pk, sk) = suite.issuer_keygen(NAMES.len() + RESERVED_SLOTS, bits, &mut rng).unwrap();
        let (params, initial) = suite.accumulator_setup(&pk, &mut rng);
        let registry = RevocationRegistry::new("creddef:test", params, initial);
        Self { suite, pk, sk, registry }
    }

    /// Runs blinded issuance for `raw` and returns the completed credential.
    pub fn issue(&mut self, raw: &[String], rng: &mut Drbg) -> Held<S> {
        let ms = MasterSecret::random(rng);
        let nonce = [7u8; 16];
        let (blinded, factor) = self.suite.blind_master_secret(&self.pk, &ms, &nonce, rng);
        let attrs = cl::encode_attributes(raw);
        let iss =
            issue_credential(&self.suite, &self.pk, &self.sk, &blinded, &nonce, &attrs, &self.registry, rng).unwrap();
        let cred = self
            .suite
            .complete_credential(&self.pk, &iss.pre_credential, &factor, &ms, &attrs, &iss.rev_index)
            .unwrap();
        self.registry = iss.registry;
        Held { cred, raw: raw.to_vec(), rev_index: iss.rev_index, witness: iss.witness }
    }

    pub fn request(&self, nonce: [u8; 16], reveal: &[&str]) -> ProofRequest {
        ProofRequest {
            nonce,
            requested_reveal: reveal.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            cred_def_id: self.registry.cred_def_id.clone(),
            registry_id: self.registry.id.clone(),
            registry_version: self.registry.version(),
        }
    }

    /// Brings the holder's witness up to the current registry version.
    pub fn refresh(&self, held: &mut Held<S>) {
        let deltas = self.registry.deltas_since(held.witness.version);
        held.witness = self
            .suite
            .witness_update(&self.registry.params, &held.rev_index, &held.witness, deltas, self.registry.value())
            .unwrap();
    }

    pub fn present(&self, held: &Held<S>, req: &ProofRequest, rng: &mut Drbg) -> S::Presentation {
        self.suite
            .create_presentation(
                &self.pk,
                &held.cred,
                &names(),
                &held.raw,
                req,
                &held.witness,
                &self.registry.params,
                self.registry.value(),
                rng,
            )
            .unwrap()
    }

    pub fn verify(&self, pres: &S::Presentation, req: &ProofRequest) -> bool {
        self.suite.verify_presentation(&self.pk, &names(), pres, req, &self.registry.params, self.registry.value())
    }
}

pub fn raw_attrs(emsp: &str, contract: &str, tariff: &str) -> Vec<String> {
    vec![emsp.into(), contract.into(), tariff.into()]
}

/// Every leaf of `v` with its path.
pub fn leaves(prefix: &str, v: &WireValue, out: &mut Vec<(String, WireValue)>) {
    match v {
        WireValue::Record { fields, .. } => {
            for (i, f) in fields.iter().enumerate() {
                leaves(&format!("{prefix}.{i}"), f, out);
            }
        }
        WireValue::Seq(items) => {
            for (i, f) in items.iter().enumerate() {
                leaves(&format!("{prefix}[{i}]"), f, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn mutate_leaf(v: &WireValue) -> WireValue {
    match v {
        WireValue::Uint(n) => WireValue::Uint(n + 1u32),
        WireValue::Bytes(b) if b.is_empty() => WireValue::Bytes(vec![0]),
        WireValue::Bytes(b) => {
            let mut b = b.clone();
            b[0] ^= 1;
            WireValue::Bytes(b)
        }
        WireValue::Text(t) => WireValue::Text(format!("{t}x")),
        other => other.clone(),
    }
}

fn mutate_nth(v: &WireValue, target: usize, counter: &mut usize) -> WireValue {
    match v {
        WireValue::Record { tag, fields } => {
            WireValue::Record { tag: *tag, fields: fields.iter().map(|f| mutate_nth(f, target, counter)).collect() }
        }
        WireValue::Seq(items) => WireValue::Seq(items.iter().map(|f| mutate_nth(f, target, counter)).collect()),
        leaf => {
            let out = if *counter == target { mutate_leaf(leaf) } else { leaf.clone() };
            *counter += 1;
            out
        }
    }
}

/// One copy of `v` per leaf, each with exactly that leaf changed.
pub fn single_field_mutations(v: &WireValue) -> Vec<(String, WireValue)> {
    let mut paths = Vec::new();
    leaves("", v, &mut paths);
    (0..paths.len()).map(|i| (paths[i].0.clone(), mutate_nth(v, i, &mut 0))).collect()
}

/// Number of mutants that decode and still verify.
pub fn accepted_mutants<S: CryptoSuite>(issuer: &Issuer<S>, pres: &S::Presentation, req: &ProofRequest) -> Vec<String> {
    single_field_mutations(&pres.to_wire())
        .into_iter()
        .filter(|(_, m)| S::Presentation::from_wire(m).is_ok_and(|p| issuer.verify(&p, req)))
        .map(|(path, _)| path)
        .collect()
}

pub struct Delivered {
    pub result: Result<(), ActorError>,
    pub outbox: Vec<(Addr, Vec<u8>)>,
    pub emitted: Vec<Emitted>,
}

impl Delivered {
    pub fn only(&self) -> &[u8] {
        assert_eq!(self.outbox.len(), 1, "expected one outbound message");
        &self.outbox[0].1
    }
}

/// Hands `bytes` straight to actor `to`, bypassing the bus.
pub fn deliver<S: CryptoSuite>(w: &mut World<S>, from: Addr, to: Addr, bytes: &[u8]) -> Delivered {
    let env = Envelope::decode(bytes).unwrap();
    let mut ctx = Ctx::new(&w.suite, &w.ledger, &w.directory, w.now, to);
    let result = match to {
        Addr::Steward => w.steward.handle(&mut ctx, from, &env),
        Addr::Emsp(i) => w.emsps[i as usize].handle(&mut ctx, from, &env),
        Addr::Ev(i) => w.evs[i as usize].handle(&mut ctx, from, &env),
        Addr::Cp(i) => w.cps[i as usize].handle(&mut ctx, from, &env),
        Addr::Cpo(i) => w.cpos[i as usize].handle(&mut ctx, from, &env),
        Addr::Adversary => panic!("not an honest actor"),
    };
    Delivered { result, outbox: ctx.outbox, emitted: ctx.emitted }
}
