mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::{Mutex, OnceLock};

use common::{accepted_mutants, leaves, names, raw_attrs, Issuer};
use num_bigint::BigUint;
use num_traits::One;
use pnc_ssi::codec::{Bytes, Wire, WireValue};
use pnc_ssi::crypto::cl::{self, ClParams};
use pnc_ssi::crypto::{
    accumulator, bigint, check_contract_auth, drbg, make_contract_auth, Concrete, ContractId, ContractKey,
    ContractStore, CryptoError, CryptoSuite, DeltaOp, MasterSecret, SymPresentation, Symbolic, DEFAULT_WINDOW_SECS,
    DID_LEN,
};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

const BITS: u64 = 512;

fn concrete_issuer() -> Issuer<Concrete> {
    Issuer::new(Concrete, BITS, 11)
}

// Identity, signatures, sealed boxes, HMAC.

fn did_determinism<S: CryptoSuite>(suite: S) {
    let a = suite.gen_did_keys(&mut drbg(1, "k"));
    let b = suite.gen_did_keys(&mut drbg(1, "k"));
    assert_eq!(a, b);
    assert_eq!(a.did.as_str().len(), DID_LEN);
}

#[test]
fn did_keys_are_deterministic() {
    did_determinism(Concrete);
    did_determinism(Symbolic::new(1));
}

#[test]
fn dids_are_distinct_over_ten_thousand_seeds() {
    let mut seen = HashSet::new();
    for seed in 0..10_000u64 {
        let keys = Concrete.gen_did_keys(&mut drbg(seed, "k"));
        assert_eq!(keys.did.as_str().len(), DID_LEN);
        assert!(seen.insert(keys.did));
    }
}

fn signatures<S: CryptoSuite>(suite: S) {
    let keys: Vec<_> = (0..4).map(|i| suite.gen_did_keys(&mut drbg(i, "sig"))).collect();
    let msg = b"WriteVerinymReq".to_vec();
    for (i, signer) in keys.iter().enumerate() {
        let sig = suite.sign(&signer.secret, &msg);
        for (j, verifier) in keys.iter().enumerate() {
            assert_eq!(suite.verify(&verifier.public, &msg, &sig), i == j);
        }
        let mut m = msg.clone();
        m[0] ^= 1;
        assert!(!suite.verify(&signer.public, &m, &sig));
        let mut s = sig.clone();
        s[3] ^= 0x10;
        assert!(!suite.verify(&signer.public, &msg, &s));
        assert!(!suite.verify(&signer.public, &msg, &sig[..sig.len() - 1]));
    }
}

#[test]
fn signature_cross_key_matrix() {
    signatures(Concrete);
    signatures(Symbolic::new(2));
}

fn sealed_boxes<S: CryptoSuite>(suite: S) {
    let mut rng = drbg(3, "seal");
    let alice = suite.gen_did_keys(&mut rng);
    let bob = suite.gen_did_keys(&mut rng);
    let a = suite.pk_encrypt(&bob.public, Some(&alice.secret), b"offer", &mut rng);
    let b = suite.pk_encrypt(&bob.public, Some(&alice.secret), b"offer", &mut rng);
    assert_ne!(a, b);
    let opened = suite.pk_decrypt(&bob.secret, &a).unwrap();
    assert_eq!(opened.plaintext, b"offer");
    assert_eq!(opened.sender, Some(alice.public.enc.clone()));
    assert_eq!(suite.pk_decrypt(&alice.secret, &a), Err(CryptoError::DecryptFailed));
    let anon = suite.pk_encrypt(&bob.public, None, b"x", &mut rng);
    assert_eq!(suite.pk_decrypt(&bob.secret, &anon).unwrap().sender, None);
}

#[test]
fn sealed_box_round_trip_and_key_binding() {
    sealed_boxes(Concrete);
    sealed_boxes(Symbolic::new(3));
}

#[test]
fn sealed_box_tampering_fails() {
    let mut rng = drbg(4, "seal");
    let bob = Concrete.gen_did_keys(&mut rng);
    let blob = Concrete.pk_encrypt(&bob.public, None, b"contract", &mut rng);
    for i in 0..blob.len() {
        let mut t = blob.clone();
        t[i] ^= 0x80;
        assert!(Concrete.pk_decrypt(&bob.secret, &t).is_err(), "byte {i}");
    }
}

fn hex32(s: &str) -> Vec<u8> {
    hex::decode(s).unwrap()
}

fn padded_key(k: &[u8]) -> ContractKey {
    let mut out = [0u8; 32];
    out[..k.len()].copy_from_slice(k);
    ContractKey(out)
}

#[test]
fn hmac_matches_published_vectors() {
    // Keys shorter than the block are zero-padded by HMAC, so padding them to
    // 32 bytes leaves the published tags unchanged.
    let case1 = padded_key(&[0x0b; 20]);
    assert_eq!(
        Concrete.hmac_tag(&case1, b"Hi There"),
        hex32("b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7")
    );
    let case2 = padded_key(b"Jefe");
    assert_eq!(
        Concrete.hmac_tag(&case2, b"what do ya want for nothing?"),
        hex32("5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843")
    );
}

/// HMAC-SHA256 from its definition, as an oracle.
fn reference_hmac(key: &[u8; 32], msg: &[u8]) -> Vec<u8> {
    let mut block = [0u8; 64];
    block[..32].copy_from_slice(key);
    let inner: Vec<u8> = block.iter().map(|b| b ^ 0x36).chain(msg.iter().copied()).collect();
    let inner_digest = Sha256::digest(&inner);
    let outer: Vec<u8> = block.iter().map(|b| b ^ 0x5c).chain(inner_digest.iter().copied()).collect();
    Sha256::digest(&outer).to_vec()
}

proptest! {
    #[test]
    fn hmac_matches_reference(key in any::<[u8; 32]>(), msg in proptest::collection::vec(any::<u8>(), 0..200)) {
        let expected = reference_hmac(&key, &msg);
        let k = ContractKey(key);
        prop_assert_eq!(Concrete.hmac_tag(&k, &msg), expected.clone());
        prop_assert!(Concrete.hmac_verify(&k, &msg, &expected));
        let mut other = key;
        other[0] ^= 1;
        prop_assert!(!Concrete.hmac_verify(&ContractKey(other), &msg, &expected));
    }
}

// Issuer keys.

fn fermat_probable_prime(n: &BigUint) -> bool {
    let one = BigUint::one();
    if n <= &BigUint::from(3u32) {
        return n > &one;
    }
    [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37].iter().all(|&b| BigUint::from(b).modpow(&(n - &one), n) == one)
}

#[test]
fn issuer_key_structure() {
    let (pk, sk) = Concrete.issuer_keygen(4, BITS, &mut drbg(5, "issuer")).unwrap();
    assert_eq!(pk.n.bits(), BITS);
    assert_eq!(pk.n, &sk.p * &sk.q);
    for (p, pp) in [(&sk.p, &sk.p_prime), (&sk.q, &sk.q_prime)] {
        assert_eq!(*p, pp * 2u32 + 1u32);
        assert!(fermat_probable_prime(p) && fermat_probable_prime(pp));
    }
    assert_eq!(pk.z, pk.s.modpow(&sk.x_z, &pk.n));
    assert_eq!(pk.r.len(), 4);
    let two = BigUint::from(2u32);
    for (r, x) in pk.r.iter().zip(&sk.x_r) {
        assert_eq!(*r, pk.s.modpow(x, &pk.n));
    }
    for g in std::iter::once(&pk.s).chain(std::iter::once(&pk.z)).chain(&pk.r) {
        assert!(g >= &two && g < &pk.n);
        // Elements of the quadratic-residue subgroup have order dividing p'q'.
        assert!(g.modpow(&sk.order(), &pk.n).is_one());
    }
}

#[test]
fn issuer_keygen_is_reproducible() {
    let a = Concrete.issuer_keygen(5, BITS, &mut drbg(6, "issuer")).unwrap();
    let b = Concrete.issuer_keygen(5, BITS, &mut drbg(6, "issuer")).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.to_bytes(), b.1.to_bytes());
    let c = Concrete.issuer_keygen(5, BITS, &mut drbg(7, "issuer")).unwrap();
    assert_ne!(a.0, c.0);
    assert!(Concrete.issuer_keygen(1, BITS, &mut drbg(6, "issuer")).is_err());
}

// Blinded issuance.

#[test]
fn blinding_is_bound_to_nonce_and_opening() {
    let issuer = concrete_issuer();
    let mut rng = drbg(8, "blind");
    let ms = MasterSecret::random(&mut rng);
    let (blinded, factor) = Concrete.blind_master_secret(&issuer.pk, &ms, b"offer-nonce-1", &mut rng);
    assert!(Concrete.verify_blinding(&issuer.pk, &blinded, b"offer-nonce-1"));
    assert!(!Concrete.verify_blinding(&issuer.pk, &blinded, b"offer-nonce-2"));
    let expected = issuer.pk.s.modpow(&factor.v_prime, &issuer.pk.n)
        * issuer.pk.r[0].modpow(&ms.to_biguint(), &issuer.pk.n)
        % &issuer.pk.n;
    assert_eq!(blinded.u, expected);
    assert_eq!(factor.v_prime.bits(), ClParams::new(BITS).v_prime());
}

fn cl_equation_holds(pk: &cl::ClIssuerPublicKey, cred: &cl::ClCredential) -> bool {
    let n = &pk.n;
    let mut acc = cred.a.modpow(&cred.e, n) * pk.s.modpow(&cred.v, n) % n;
    for (r, m) in pk.r.iter().zip(&cred.messages) {
        acc = acc * r.modpow(m, n) % n;
    }
    acc == pk.z
}

#[test]
fn issuance_completes_and_refreshes_the_accumulator() {
    let mut issuer = concrete_issuer();
    let mut rng = drbg(9, "issue");
    let a = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let b = issuer.issue(&raw_attrs("DE-EM001", "c2", "standard"), &mut rng);
    for held in [&a, &b] {
        assert!(cl_equation_holds(&issuer.pk, &held.cred));
        let lo = BigUint::one() << ClParams::E_START;
        assert!(held.cred.e > lo && held.cred.e < &lo + (BigUint::one() << ClParams::E_RANGE));
        assert_eq!(held.cred.messages[1], held.rev_index);
    }
    assert_ne!(a.cred.e, b.cred.e);
    assert_ne!(a.rev_index, b.rev_index);
    let recomputed = accumulator::recompute(&issuer.registry.params, &issuer.registry.active());
    assert_eq!(&recomputed, issuer.registry.value());
    assert!(Concrete.witness_valid(&issuer.registry.params, &b.rev_index, &b.witness.value, issuer.registry.value()));
}

#[test]
fn issuance_rejects_bad_blinding_and_schema() {
    let issuer = concrete_issuer();
    let mut rng = drbg(10, "issue");
    let ms = MasterSecret::random(&mut rng);
    let (blinded, _) = Concrete.blind_master_secret(&issuer.pk, &ms, b"n1", &mut rng);
    let attrs = cl::encode_attributes(&raw_attrs("DE-EM001", "c", "t"));
    let err = pnc_ssi::crypto::issue_credential(
        &Concrete,
        &issuer.pk,
        &issuer.sk,
        &blinded,
        b"n2",
        &attrs,
        &issuer.registry,
        &mut rng,
    );
    assert_eq!(err.err(), Some(CryptoError::InvalidBlinding));
    let err = pnc_ssi::crypto::issue_credential(
        &Concrete,
        &issuer.pk,
        &issuer.sk,
        &blinded,
        b"n1",
        &attrs[..2],
        &issuer.registry,
        &mut rng,
    );
    assert_eq!(err.err(), Some(CryptoError::SchemaMismatch));
}

#[test]
fn completion_rejects_every_tampered_input() {
    let issuer = concrete_issuer();
    let mut rng = drbg(12, "complete");
    let ms = MasterSecret::random(&mut rng);
    let (blinded, factor) = Concrete.blind_master_secret(&issuer.pk, &ms, b"n", &mut rng);
    let raw = raw_attrs("DE-EM001", "c", "premium");
    let attrs = cl::encode_attributes(&raw);
    let iss = pnc_ssi::crypto::issue_credential(
        &Concrete,
        &issuer.pk,
        &issuer.sk,
        &blinded,
        b"n",
        &attrs,
        &issuer.registry,
        &mut rng,
    )
    .unwrap();
    let pre = iss.pre_credential.clone();
    assert!(Concrete.complete_credential(&issuer.pk, &pre, &factor, &ms, &attrs, &iss.rev_index).is_ok());

    let one = BigUint::one();
    let mut bad_a = pre.clone();
    bad_a.a += &one;
    let mut bad_e = pre.clone();
    bad_e.e += 2u32;
    let mut bad_v = pre.clone();
    bad_v.v_prime_prime += &one;
    for bad in [bad_a, bad_e, bad_v] {
        let r = Concrete.complete_credential(&issuer.pk, &bad, &factor, &ms, &attrs, &iss.rev_index);
        assert_eq!(r.err(), Some(CryptoError::InvalidSignature));
    }
    for i in 0..attrs.len() {
        let mut changed = attrs.clone();
        changed[i] += &one;
        let r = Concrete.complete_credential(&issuer.pk, &pre, &factor, &ms, &changed, &iss.rev_index);
        assert_eq!(r.err(), Some(CryptoError::InvalidSignature), "attribute {i}");
    }
    let other_ms = MasterSecret([9; 32]);
    let r = Concrete.complete_credential(&issuer.pk, &pre, &factor, &other_ms, &attrs, &iss.rev_index);
    assert_eq!(r.err(), Some(CryptoError::InvalidSignature));
    let r = Concrete.complete_credential(&issuer.pk, &pre, &factor, &ms, &attrs, &(&iss.rev_index + &one));
    assert_eq!(r.err(), Some(CryptoError::InvalidSignature));
}

// Presentations.

fn presentation_lifecycle<S: CryptoSuite>(suite: S) {
    let mut issuer = Issuer::new(suite.clone(), BITS, 13);
    let mut rng = drbg(13, "present");
    let mut held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let req = issuer.request([1; 16], &["emsp_id"]);
    let pres = issuer.present(&held, &req, &mut rng);
    assert!(issuer.verify(&pres, &req));
    use pnc_ssi::crypto::PresentationView;
    let revealed: BTreeMap<String, String> = [("emsp_id".to_string(), "DE-EM001".to_string())].into();
    assert_eq!(pres.revealed(), &revealed);

    let replay = issuer.request([2; 16], &["emsp_id"]);
    assert!(!issuer.verify(&pres, &replay));
    let wider = issuer.request([1; 16], &["emsp_id", "tariff"]);
    assert!(!issuer.verify(&pres, &wider));

    // A second holder joins; the first one's witness is now stale.
    let other = issuer.issue(&raw_attrs("DE-EM001", "c2", "standard"), &mut rng);
    let req = issuer.request([3; 16], &["emsp_id"]);
    let stale = suite.create_presentation(
        &issuer.pk,
        &held.cred,
        &names(),
        &held.raw,
        &req,
        &held.witness,
        &issuer.registry.params,
        issuer.registry.value(),
        &mut rng,
    );
    assert!(matches!(stale, Err(CryptoError::StaleWitness { .. })));
    issuer.refresh(&mut held);
    let pres = issuer.present(&held, &req, &mut rng);
    assert!(issuer.verify(&pres, &req));

    // Revoke the first holder; its old presentation no longer verifies
    // against the new accumulator value.
    issuer.registry = issuer.registry.revoke(&issuer.suite, &issuer.sk, &held.rev_index).unwrap();
    let req = issuer.request([3; 16], &["emsp_id"]);
    assert!(!issuer.verify(&pres, &req));
    let deltas = issuer.registry.deltas_since(held.witness.version);
    let r =
        suite.witness_update(&issuer.registry.params, &held.rev_index, &held.witness, deltas, issuer.registry.value());
    assert_eq!(r.err(), Some(CryptoError::Revoked));
    let mut other = other;
    issuer.refresh(&mut other);
    let pres = issuer.present(&other, &req, &mut rng);
    assert!(issuer.verify(&pres, &req));
}

#[test]
fn presentation_lifecycle_concrete() {
    presentation_lifecycle(Concrete);
}

#[test]
fn presentation_lifecycle_symbolic() {
    presentation_lifecycle(Symbolic::new(13));
}

#[test]
fn single_field_mutations_of_a_presentation_are_rejected() {
    let mut issuer = concrete_issuer();
    let mut rng = drbg(14, "mutate");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    for i in 0..3u8 {
        let req = issuer.request([i; 16], &["emsp_id"]);
        let pres = issuer.present(&held, &req, &mut rng);
        assert!(issuer.verify(&pres, &req));
        assert_eq!(accepted_mutants(&issuer, &pres, &req), Vec::<String>::new());
    }
}

#[test]
fn symbolic_forgeries_never_verify() {
    let mut issuer = Issuer::new(Symbolic::new(15), BITS, 15);
    let mut rng = drbg(15, "forge");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let req = issuer.request([5; 16], &["emsp_id"]);
    let pres = issuer.present(&held, &req, &mut rng);
    assert!(issuer.verify(&pres, &req));
    assert!(accepted_mutants(&issuer, &pres, &req).is_empty());

    // Tokens minted by an unrelated oracle, or assembled by hand.
    let mut foreign = Issuer::new(Symbolic::new(16), BITS, 15);
    let foreign_held = foreign.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let foreign_req = foreign.request([5; 16], &["emsp_id"]);
    let foreign_pres = foreign.present(&foreign_held, &foreign_req, &mut rng);
    assert!(!issuer.verify(&foreign_pres, &req));
    let mut handmade: SymPresentation = pres.clone();
    handmade.token.mac = Bytes(vec![0; 32]);
    assert!(!issuer.verify(&handmade, &req));
}

fn transcript_leaves<S: CryptoSuite>(pres: &S::Presentation) -> BTreeMap<String, WireValue> {
    let mut out = Vec::new();
    leaves("", &pres.to_wire(), &mut out);
    out.into_iter().collect()
}

fn shared_fields(a: &BTreeMap<String, WireValue>, b: &BTreeMap<String, WireValue>) -> BTreeSet<String> {
    a.iter().filter(|(k, v)| b.get(*k) == Some(*v)).map(|(k, _)| k.clone()).collect()
}

fn transcript_intersections<S: CryptoSuite>(suite: S, runs: usize) {
    let mut issuer = Issuer::new(suite, BITS, 17);
    let mut rng = drbg(17, "unlink");
    let mut one = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let two = issuer.issue(&raw_attrs("DE-EM001", "c2", "standard"), &mut rng);
    issuer.refresh(&mut one);
    let req = issuer.request([6; 16], &["emsp_id"]);
    let same: Vec<_> = (0..runs).map(|_| transcript_leaves::<S>(&issuer.present(&one, &req, &mut rng))).collect();
    let cross: Vec<_> = (0..runs).map(|_| transcript_leaves::<S>(&issuer.present(&two, &req, &mut rng))).collect();

    let mut within = BTreeSet::new();
    for i in 0..runs {
        for j in i + 1..runs {
            within.insert(shared_fields(&same[i], &same[j]));
        }
    }
    let mut between = BTreeSet::new();
    for a in &same {
        for b in &cross {
            between.insert(shared_fields(a, b));
        }
    }
    assert_eq!(within.len(), 1, "pairs of one credential differ in what they share: {within:?}");
    assert_eq!(within, between);
}

#[test]
fn transcript_intersections_do_not_depend_on_the_credential_concrete() {
    transcript_intersections(Concrete, 100);
}

#[test]
fn transcript_intersections_do_not_depend_on_the_credential_symbolic() {
    transcript_intersections(Symbolic::new(17), 100);
}

fn shared_issuer() -> &'static Mutex<Issuer<Concrete>> {
    static ISSUER: OnceLock<Mutex<Issuer<Concrete>>> = OnceLock::new();
    ISSUER.get_or_init(|| Mutex::new(Issuer::new(Concrete, BITS, 18)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn cl_completeness(
        contract in "[a-z0-9]{1,24}",
        tariff in "\\PC{0,16}",
        reveal_tariff in any::<bool>(),
        seed in any::<u64>(),
        nonce in any::<[u8; 16]>(),
    ) {
        let mut issuer = shared_issuer().lock().unwrap();
        let mut rng = drbg(seed, "completeness");
        let held = issuer.issue(&raw_attrs("DE-EM001", &contract, &tariff), &mut rng);
        prop_assert!(cl_equation_holds(&issuer.pk, &held.cred));
        let reveal: &[&str] = if reveal_tariff { &["emsp_id", "tariff"] } else { &["emsp_id"] };
        let req = issuer.request(nonce, reveal);
        let pres = issuer.present(&held, &req, &mut rng);
        prop_assert!(issuer.verify(&pres, &req));
    }
}

// Accumulator.

#[test]
fn add_then_revoke_restores_value() {
    let mut issuer = concrete_issuer();
    let e = bigint::random_prime(&mut drbg(19, "e"), 128);
    let before = issuer.registry.value().clone();
    issuer.registry = issuer.registry.add(&Concrete, &e).unwrap();
    assert_eq!(issuer.registry.value(), &before.modpow(&e, &issuer.registry.params.modulus));
    issuer.registry = issuer.registry.revoke(&Concrete, &issuer.sk, &e).unwrap();
    assert_eq!(issuer.registry.value(), &before);
    assert_eq!(issuer.registry.version(), 2);
    assert!(issuer.registry.is_well_formed());
    let r = issuer.registry.revoke(&Concrete, &issuer.sk, &e);
    assert_eq!(r.err(), Some(CryptoError::UnknownElement));
    assert_eq!(
        issuer.registry.add(&Concrete, &e).unwrap().add(&Concrete, &e).err(),
        Some(CryptoError::DuplicateElement)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn incremental_value_matches_recomputation(ops in proptest::collection::vec((any::<bool>(), 0usize..64), 1..64)) {
        static ISSUER: OnceLock<Issuer<Concrete>> = OnceLock::new();
        let issuer = ISSUER.get_or_init(concrete_issuer);
        let mut rng = drbg(20, "acc");
        let pool: Vec<BigUint> = (0..64).map(|_| bigint::random_prime(&mut rng, 64)).collect();
        let mut reg = issuer.registry.clone();
        let base = reg.params.base.clone();
        let n = reg.params.modulus.clone();
        for (add, i) in ops {
            let e = &pool[i];
            let active = reg.active();
            reg = if add && !active.contains(e) {
                reg.add(&Concrete, e).unwrap()
            } else if !add && active.contains(e) {
                reg.revoke(&Concrete, &issuer.sk, e).unwrap()
            } else {
                continue;
            };
            let product: BigUint = reg.active().iter().product();
            prop_assert_eq!(reg.value(), &base.modpow(&product, &n));
        }
    }
}

#[test]
fn witness_update_after_three_adds_and_one_removal_matches_fresh_witness() {
    let mut issuer = concrete_issuer();
    let mut rng = drbg(21, "witness");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let others: Vec<BigUint> = (0..3).map(|_| bigint::random_prime(&mut rng, 128)).collect();
    for e in &others {
        issuer.registry = issuer.registry.add(&Concrete, e).unwrap();
    }
    issuer.registry = issuer.registry.revoke(&Concrete, &issuer.sk, &others[1]).unwrap();
    let reg = &issuer.registry;
    let updated = Concrete
        .witness_update(
            &reg.params,
            &held.rev_index,
            &held.witness,
            reg.deltas_since(held.witness.version),
            reg.value(),
        )
        .unwrap();
    assert_eq!(updated.version, reg.version());
    let n = &reg.params.modulus;
    assert_eq!(&updated.value.modpow(&held.rev_index, n), reg.value());

    // With the factorization, the fresh witness is the unique e-th root of V
    // in the quadratic residues.
    let inv = bigint::mod_inverse(&held.rev_index, &issuer.sk.order()).unwrap();
    assert_eq!(updated.value, reg.value().modpow(&inv, n));
    let product: BigUint = reg.active().iter().filter(|e| **e != held.rev_index).product();
    assert_eq!(updated.value, reg.params.base.modpow(&product, n));
}

#[test]
fn witness_update_for_a_revoked_holder_fails() {
    let mut issuer = concrete_issuer();
    let mut rng = drbg(22, "witness");
    let held = issuer.issue(&raw_attrs("DE-EM001", "c1", "standard"), &mut rng);
    let other = bigint::random_prime(&mut rng, 128);
    issuer.registry = issuer.registry.add(&Concrete, &other).unwrap();
    issuer.registry = issuer.registry.revoke(&Concrete, &issuer.sk, &held.rev_index).unwrap();
    let later = bigint::random_prime(&mut rng, 128);
    issuer.registry = issuer.registry.add(&Concrete, &later).unwrap();
    let reg = &issuer.registry;
    let r = Concrete.witness_update(&reg.params, &held.rev_index, &held.witness, reg.deltas_since(1), reg.value());
    assert_eq!(r.err(), Some(CryptoError::Revoked));
    assert!(matches!(reg.deltas[2].op, DeltaOp::Remove(_)));
}

// Contract authentication data.

fn contract_auth_cases<S: CryptoSuite>(suite: S) {
    let mut rng = drbg(23, "auth");
    let emsp = suite.gen_did_keys(&mut rng);
    let other_emsp = suite.gen_did_keys(&mut rng);
    let id = ContractId([4; 16]);
    let key = ContractKey([5; 32]);
    let mut store = ContractStore::default();
    store.insert(id, key.clone());
    let req = b"proof request bytes";
    let req_hash = pnc_ssi::crypto::sha256(req);
    let now = 1_700_000_000;

    let blob = make_contract_auth(&suite, &emsp.public, &key, id, req, now, &mut rng);
    let ok = check_contract_auth(&suite, &emsp.secret, &mut store, &blob, &req_hash, now, DEFAULT_WINDOW_SECS).unwrap();
    assert_eq!(ok.contract_id, id);
    let again = check_contract_auth(&suite, &emsp.secret, &mut store, &blob, &req_hash, now, DEFAULT_WINDOW_SECS);
    assert_eq!(again.err(), Some(CryptoError::Replayed));

    let blob = make_contract_auth(&suite, &emsp.public, &key, id, req, now + 1, &mut rng);
    let r = check_contract_auth(&suite, &other_emsp.secret, &mut store, &blob, &req_hash, now, DEFAULT_WINDOW_SECS);
    assert_eq!(r.err(), Some(CryptoError::DecryptFailed));
    let r = check_contract_auth(&suite, &emsp.secret, &mut store, &blob, &[0; 32], now, DEFAULT_WINDOW_SECS);
    assert_eq!(r.err(), Some(CryptoError::BadTag));

    let wrong_key = make_contract_auth(&suite, &emsp.public, &ContractKey([6; 32]), id, req, now, &mut rng);
    let r = check_contract_auth(&suite, &emsp.secret, &mut store, &wrong_key, &req_hash, now, DEFAULT_WINDOW_SECS);
    assert_eq!(r.err(), Some(CryptoError::BadTag));
    let unknown = make_contract_auth(&suite, &emsp.public, &key, ContractId([8; 16]), req, now, &mut rng);
    let r = check_contract_auth(&suite, &emsp.secret, &mut store, &unknown, &req_hash, now, DEFAULT_WINDOW_SECS);
    assert_eq!(r.err(), Some(CryptoError::UnknownContract));
}

#[test]
fn contract_auth_round_trip_and_rejections() {
    contract_auth_cases(Concrete);
    contract_auth_cases(Symbolic::new(23));
}

#[test]
fn contract_auth_clock_skew_matrix() {
    let mut rng = drbg(24, "skew");
    let emsp = Concrete.gen_did_keys(&mut rng);
    let key = ContractKey([1; 32]);
    let now: u64 = 1_700_000_000;
    let w = DEFAULT_WINDOW_SECS;
    let cases: [(i64, bool); 7] = [
        (0, true),
        (-(w as i64), true),
        (w as i64, true),
        (-(w as i64) - 1, false),
        (w as i64 + 1, false),
        (-3 * w as i64, false),
        (3600, true),
    ];
    for (i, (skew, accepted)) in cases.into_iter().enumerate() {
        let id = ContractId([i as u8; 16]);
        let mut store = ContractStore::default();
        store.insert(id, key.clone());
        let ts = now.checked_add_signed(skew).unwrap();
        let blob = make_contract_auth(&Concrete, &emsp.public, &key, id, b"req", ts, &mut rng);
        let r =
            check_contract_auth(&Concrete, &emsp.secret, &mut store, &blob, &pnc_ssi::crypto::sha256(b"req"), now, w);
        if accepted {
            assert!(r.is_ok(), "skew {skew}");
        } else {
            assert_eq!(r.err(), Some(CryptoError::Expired), "skew {skew}");
        }
    }
}

#[test]
fn keystore_is_deterministic_and_passphrase_bound() {
    use pnc_ssi::crypto::keystore::{open, seal, KeystoreContent};
    let keys = Concrete.gen_did_keys(&mut drbg(25, "ks"));
    let content = KeystoreContent { role: "emsp".into(), did: keys.did.clone(), secret: keys.secret.clone() };
    let a = seal(&content, "pw", 1000, &mut drbg(25, "seal"));
    let b = seal(&content, "pw", 1000, &mut drbg(25, "seal"));
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(open(&a, "pw").unwrap(), content);
    assert!(open(&a, "other").is_err());
    let digest = Sha256::digest(a.to_bytes());
    assert_ne!(digest.as_slice(), &[0u8; 32]);
}
